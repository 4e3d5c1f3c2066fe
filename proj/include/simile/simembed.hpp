#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "simile/error.hpp"
#include "simile/text.hpp"

namespace simile {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using TokenIds = std::vector<int>;

inline constexpr int kDefaultEmbeddingDim = 300;
inline constexpr const char* kUnknownToken = "<unk>";

// Mean of the selected rows of `table`.
template <typename Derived>
Vector<typename Derived::Scalar> mean_of_rows(const Eigen::MatrixBase<Derived>& table,
                                              std::span<const int> rows) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> acc = Vector<Scalar>::Zero(table.cols());
  for (int r : rows) acc += table.row(r).transpose();
  return acc / static_cast<Scalar>(rows.size());
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// d cos(a, b) / d a.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> cosine_grad(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  const Scalar c = a.dot(b) / (na * nb);
  return b / (na * nb) - c * a / (na * na);
}

/// Token-to-vector map holding the encoder parameters. Row 0 is always the
/// unknown-token row; every other row belongs to one vocabulary token.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // `tokens` must contain kUnknownToken; it is moved to row 0 if needed.
  EmbeddingTable(std::vector<std::string> tokens, RowMatrix<double> vectors);

  // Uniform init in [-scale, scale] per component.
  static EmbeddingTable random(const std::vector<std::string>& vocab, int dim, std::uint64_t seed,
                               double scale = 0.05);

  int dim() const { return static_cast<int>(vectors_.cols()); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const RowMatrix<double>& vectors() const { return vectors_; }
  RowMatrix<double>& vectors() { return vectors_; }

  int id(const std::string& token) const;
  TokenIds ids(const Tokens& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  RowMatrix<double> vectors_;
};

struct ParaphrasePair {
  Tokens s;
  Tokens s_prime;
};

struct SimTrainConfig {
  double margin = 0.4;
  std::size_t minibatch_size = 64;
  std::size_t megabatch_factor = 4;
  double learning_rate = 0.05;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  bool bidirectional = false;

  void validate() const;
};

struct SimTrainResult {
  EmbeddingTable table;
  // Entry 0 is the loss before training, entry e the loss after epoch e.
  std::vector<double> loss_log;
};

using SparseGradient = std::map<int, Vector<double>>;

Vector<double> encode(const EmbeddingTable& table, std::span<const int> ids);
Vector<double> encode(const EmbeddingTable& table, const Tokens& tokens);

double sim(const EmbeddingTable& table, const Tokens& r, const Tokens& h);

double margin_loss(const EmbeddingTable& table, const ParaphrasePair& pair, const Tokens& negative,
                   double margin);

SparseGradient margin_loss_grad(const EmbeddingTable& table, const ParaphrasePair& pair,
                                const Tokens& negative, double margin);

// Hardest negative for each pair: the s' of another pair with the highest
// cosine to this pair's s. Candidates equal to either side of the pair are
// skipped; ties go to the lowest index.
std::vector<Tokens> select_negatives(const EmbeddingTable& table,
                                     std::span<const ParaphrasePair> megabatch);

SimTrainResult train_sim(EmbeddingTable table, const std::vector<ParaphrasePair>& pairs,
                         const SimTrainConfig& config);

// Mean sim over aligned pairs minus mean sim over all mismatched (i != j)
// combinations of s_i and s'_j.
double paraphrase_separation(const EmbeddingTable& table, const std::vector<ParaphrasePair>& pairs);

}  // namespace simile
