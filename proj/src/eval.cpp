#include "mmkd/eval.hpp"

#include "mmkd/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mmkd {

void EmbeddingSet::validate() const {
  if (static_cast<std::size_t>(matrix.rows()) != labels.size()) {
    throw DataError("embedding set has " + std::to_string(matrix.rows()) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  if (!matrix.allFinite()) throw DataError("embedding set contains non-finite values");
}

EmbeddingSet embed_sentences(const Encoder<float>& encoder, std::span<const std::string> sentences,
                             const Vocabulary& vocab, const LanguageId& lang, std::size_t first_group) {
  const auto dim = static_cast<Eigen::Index>(encoder.config().hidden_dim);
  EmbeddingSet out;
  out.matrix.resize(static_cast<Eigen::Index>(sentences.size()), dim);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto seq = tokenize(vocab, sentences[i]);
    if (seq.size() + 2 > encoder.config().max_len) {
      throw DataError("sentence " + std::to_string(i) + " is too long to embed (" + std::to_string(seq.size()) +
                      " tokens)");
    }
    const auto hidden = encoder.encode(encode_single(seq, encoder.config().max_len).ids, Mode::eval);
    out.matrix.row(static_cast<Eigen::Index>(i)) = hidden.value().row(0).cast<double>();
    out.labels.push_back({first_group + i, lang});
  }
  return out;
}

EmbeddingSet concat_sets(std::span<const EmbeddingSet> sets) {
  EmbeddingSet out;
  Eigen::Index rows = 0;
  Eigen::Index cols = sets.empty() ? 0 : sets.front().matrix.cols();
  for (const auto& s : sets) {
    if (s.matrix.cols() != cols) throw DataError("cannot stack embedding sets of different widths");
    rows += s.matrix.rows();
  }
  out.matrix.resize(rows, cols);
  Eigen::Index at = 0;
  for (const auto& s : sets) {
    out.matrix.middleRows(at, s.matrix.rows()) = s.matrix;
    at += s.matrix.rows();
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
  }
  return out;
}

namespace {

Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0) out.row(i) /= n;
  }
  return out;
}

double precision_at_one(const Eigen::MatrixXd& sims) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < sims.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < sims.cols(); ++j) {
      if (sims(i, j) > sims(i, best)) best = j;
    }
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sims.rows());
}

}  // namespace

std::pair<double, double> retrieval_accuracy(const EmbeddingSet& src, const EmbeddingSet& tgt) {
  src.validate();
  tgt.validate();
  if (src.size() == 0) throw DataError("retrieval needs at least one pair");
  if (src.size() != tgt.size()) throw DataError("retrieval sets differ in size");
  if (src.matrix.cols() != tgt.matrix.cols()) throw DataError("retrieval sets differ in width");
  const Eigen::MatrixXd sims = unit_rows(src.matrix) * unit_rows(tgt.matrix).transpose();
  return {precision_at_one(sims), precision_at_one(sims.transpose())};
}

ClusterStats cluster_stats(const EmbeddingSet& set) {
  set.validate();
  const Eigen::MatrixXd u = unit_rows(set.matrix);
  const Eigen::MatrixXd sims = u * u.transpose();
  double intra = 0;
  double inter = 0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  const auto n = static_cast<Eigen::Index>(set.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = 1.0 - sims(i, j);
      if (set.labels[static_cast<std::size_t>(i)].group == set.labels[static_cast<std::size_t>(j)].group) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  if (n_intra == 0 || n_inter == 0) {
    throw DataError("cluster statistics need two groups and a group with at least two members");
  }
  ClusterStats out;
  out.intra = intra / static_cast<double>(n_intra);
  out.inter = inter / static_cast<double>(n_inter);
  out.ratio = out.inter > 0 ? out.intra / out.inter : 0.0;
  return out;
}

EmbeddingSet project_2d(const EmbeddingSet& set) {
  set.validate();
  if (set.size() < 2) throw DataError("projection needs at least two rows");
  const Eigen::MatrixXd centred = set.matrix.rowwise() - set.matrix.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(set.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const auto d = cov.rows();
  if (d == 0 || !(solver.eigenvalues()(d - 1) > 0)) throw DataError("cannot project a rank-0 matrix");

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(k) = v;
  }
  EmbeddingSet out;
  out.matrix = centred * basis;
  out.labels = set.labels;
  return out;
}

void export_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  set.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "group\tlang";
  for (Eigen::Index c = 0; c < set.matrix.cols(); ++c) out << "\tv" << c + 1;
  out << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i].group << '\t' << set.labels[i].lang.code();
    for (Eigen::Index c = 0; c < set.matrix.cols(); ++c) out << '\t' << set.matrix(static_cast<Eigen::Index>(i), c);
    out << '\n';
  }
  if (!out) throw DataError("failed while writing " + path.string());
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " has no header");
  std::size_t width = 0;
  {
    std::istringstream header(line);
    std::string field;
    std::size_t fields = 0;
    while (std::getline(header, field, '\t')) ++fields;
    if (fields < 2) throw DataError(path.string() + " has a malformed header");
    width = fields - 2;
  }
  std::vector<std::vector<double>> rows;
  EmbeddingSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string group, lang, value;
    std::getline(fields, group, '\t');
    std::getline(fields, lang, '\t');
    std::vector<double> row;
    try {
      out.labels.push_back({std::stoull(group), LanguageId(lang)});
      while (std::getline(fields, value, '\t')) row.push_back(std::stod(value));
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    if (row.size() != width) throw DataError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
    rows.push_back(std::move(row));
  }
  out.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < width; ++c) {
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return out;
}

}  // namespace mmkd
