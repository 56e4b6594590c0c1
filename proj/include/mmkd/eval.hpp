#pragma once

#include "mmkd/corpus.hpp"
#include "mmkd/model.hpp"
#include "mmkd/tokenization.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mmkd {

struct EmbeddingLabel {
  std::size_t group = 0;
  LanguageId lang;

  bool operator==(const EmbeddingLabel&) const = default;
};

/// Row-per-sentence vectors with (group, language) labels. Rows that share a
/// group are translations of each other.
struct EmbeddingSet {
  Eigen::MatrixXd matrix;
  std::vector<EmbeddingLabel> labels;

  std::size_t size() const { return labels.size(); }
  /// Throws DataError if rows and labels disagree or a value is non-finite.
  void validate() const;
};

/// Last-layer [CLS] state per sentence, in eval mode. Row i gets group
/// `first_group + i`.
EmbeddingSet embed_sentences(const Encoder<float>& encoder, std::span<const std::string> sentences,
                             const Vocabulary& vocab, const LanguageId& lang, std::size_t first_group = 0);

/// Stacks sets row-wise.
EmbeddingSet concat_sets(std::span<const EmbeddingSet> sets);

/// Cosine nearest-neighbour precision@1 in both directions, assuming row i
/// of `src` translates row i of `tgt`. Ties go to the lower index.
std::pair<double, double> retrieval_accuracy(const EmbeddingSet& src, const EmbeddingSet& tgt);

struct ClusterStats {
  double intra = 0;  // mean cosine distance over same-group pairs
  double inter = 0;  // mean cosine distance over cross-group pairs
  double ratio = 0;  // intra / inter (0 when both are 0)
};

/// Needs at least two groups, and at least one group with two members.
ClusterStats cluster_stats(const EmbeddingSet& set);

/// Top-two principal components of the mean-centred rows. Each component's
/// sign makes its largest-magnitude loading positive. Labels carry over.
EmbeddingSet project_2d(const EmbeddingSet& set);

/// TSV with a `group lang v1 .. vd` header and 9 significant digits.
void export_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

}  // namespace mmkd
