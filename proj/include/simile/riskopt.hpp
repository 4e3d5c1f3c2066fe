#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "simile/error.hpp"
#include "simile/metrics.hpp"
#include "simile/simembed.hpp"

namespace simile {

// Row-wise log-softmax.
template <typename Derived>
RowMatrix<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const Scalar m = scores.row(r).maxCoeff();
    const Scalar lse = m + std::log((scores.row(r).array() - m).exp().sum());
    out.row(r) = scores.row(r).array() - lse;
  }
  return out;
}

/// Position-wise lexical translation model: target token j is drawn from
/// softmax(theta[x_j]), so outputs are length-matched to the source.
class ToyLexModel {
 public:
  ToyLexModel() = default;
  ToyLexModel(std::vector<std::string> source_vocab, std::vector<std::string> target_vocab,
              RowMatrix<double> theta);
  static ToyLexModel zeros(std::vector<std::string> source_vocab, std::vector<std::string> target_vocab);

  const std::vector<std::string>& source_vocab() const { return source_vocab_; }
  const std::vector<std::string>& target_vocab() const { return target_vocab_; }
  const RowMatrix<double>& theta() const { return theta_; }
  RowMatrix<double>& theta() { return theta_; }

  // Throw DataError on unknown tokens.
  TokenIds source_ids(const Tokens& x) const;
  TokenIds target_ids(const Tokens& u) const;
  Tokens target_tokens(std::span<const int> ids) const;

  // |x| x |V_t| matrix of per-position log-probabilities.
  RowMatrix<double> position_log_probs(std::span<const int> x) const;

 private:
  std::vector<std::string> source_vocab_;
  std::vector<std::string> target_vocab_;
  std::unordered_map<std::string, int> source_index_;
  std::unordered_map<std::string, int> target_index_;
  RowMatrix<double> theta_;
};

struct Candidate {
  Tokens tokens;
  double logprob = 0.0;
  double cost = 0.0;
};

struct NBestList {
  std::size_t index = 0;
  Tokens source;
  Tokens reference;
  std::vector<Candidate> candidates;
  // Set when fewer than k distinct sequences exist.
  bool exhausted = false;
};

struct Example {
  Tokens source;
  Tokens reference;
};

double seq_logprob(const ToyLexModel& model, const Tokens& x, const Tokens& u);

// Exact top-k target sequences by log-probability, best first; equal scores
// are ordered by target token id sequence. A candidate equal to `reference`
// is dropped and the list refilled to k.
NBestList nbest(const ToyLexModel& model, const Tokens& x, std::size_t k,
                const std::optional<Tokens>& reference = std::nullopt);

void score_candidates(NBestList& list, CostKind kind, const SimScorer& scorer);

// Softmax over candidate logprobs.
std::vector<double> candidate_posteriors(const NBestList& list);

double risk_loss(const NBestList& list);
// dL/dlogprob_i = p_i (cost_i - L).
std::vector<double> risk_grad(const NBestList& list);
// Chains risk_grad into theta through seq_logprob; the candidate set is held fixed.
RowMatrix<double> risk_theta_grad(const ToyLexModel& model, const NBestList& list);

// Cross-entropy against (1 - eps) one-hot + eps uniform, summed over positions.
double token_ls_loss(const ToyLexModel& model, const Tokens& x, const Tokens& reference, double epsilon);
RowMatrix<double> token_ls_grad(const ToyLexModel& model, const Tokens& x, const Tokens& reference,
                                double epsilon);

// Batch mean of gamma * TokLS + (1 - gamma) * Risk; costs must be populated.
double weighted_loss(const ToyLexModel& model, std::span<const NBestList> batch, double gamma,
                     double epsilon);
RowMatrix<double> weighted_grad(const ToyLexModel& model, std::span<const NBestList> batch,
                                double gamma, double epsilon);

struct OptimizerConfig {
  double learning_rate = 0.25;
  double momentum = 0.99;
  double clip_norm = 0.1;
};

template <typename Scalar>
struct NesterovState {
  RowMatrix<Scalar> velocity;
};

/// One Nesterov momentum step in the form
///   v <- mu v + g ;  p <- p - lr (g + mu v)
/// after rescaling g down to `clip_norm` when its L2 norm exceeds it.
/// Returns the gradient norm before clipping.
template <typename DerivedP, typename DerivedG>
typename DerivedP::Scalar nesterov_step(Eigen::MatrixBase<DerivedP>& params,
                                        const Eigen::MatrixBase<DerivedG>& grads,
                                        NesterovState<typename DerivedP::Scalar>& state,
                                        const OptimizerConfig& config) {
  using Scalar = typename DerivedP::Scalar;
  if (params.rows() != grads.rows() || params.cols() != grads.cols())
    throw UsageError("nesterov_step: parameter/gradient shape mismatch");
  if (!grads.allFinite()) throw NumericalError("nesterov_step: non-finite gradient");
  if (state.velocity.rows() != params.rows() || state.velocity.cols() != params.cols())
    state.velocity = RowMatrix<Scalar>::Zero(params.rows(), params.cols());
  const Scalar norm = grads.norm();
  const Scalar clip = static_cast<Scalar>(config.clip_norm);
  const Scalar scale = (clip > 0 && norm > clip) ? clip / norm : Scalar(1);
  const Scalar mu = static_cast<Scalar>(config.momentum);
  const Scalar lr = static_cast<Scalar>(config.learning_rate);
  state.velocity = mu * state.velocity + scale * grads;
  params.derived() -= lr * (scale * grads + mu * state.velocity);
  return norm;
}

struct MleTrainConfig {
  double epsilon = 0.1;
  OptimizerConfig optimizer;
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  bool anneal = true;
  double anneal_factor = 10.0;
  double anneal_floor = 1e-4;
  std::uint64_t seed = 1;

  void validate() const;
};

struct MleEpochLog {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double val_token_loss = 0.0;
};

struct MleTrainResult {
  ToyLexModel model;  // lowest validation token loss
  std::size_t best_epoch = 0;
  std::vector<MleEpochLog> log;
};

MleTrainResult train_mle(ToyLexModel model, std::span<const Example> train,
                         std::span<const Example> valid, const MleTrainConfig& config);

struct RiskTrainConfig {
  double gamma = 0.3;
  double epsilon = 0.1;
  std::size_t k = 8;
  OptimizerConfig optimizer;
  double anneal_factor = 10.0;
  double anneal_floor = 1e-4;
  bool anneal = true;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  CostKind cost_kind = CostKind::kSimile;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RiskEpochLog {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double expected_bleu_cost = 0.0;
  double expected_simile_cost = 0.0;
  double val_weighted_loss = 0.0;
};

// 1-best quality on a held-out split.
struct DecodeEval {
  double corpus_bleu = 0.0;
  double corpus_sim = 0.0;
};

struct RiskTrainResult {
  ToyLexModel model;  // lowest validation weighted loss
  ToyLexModel final_model;
  std::size_t best_epoch = 0;
  std::vector<RiskEpochLog> log;
  std::optional<DecodeEval> after_first_epoch;
  DecodeEval selected_eval;
};

Tokens decode_best(const ToyLexModel& model, const Tokens& x);
DecodeEval evaluate_decode(const ToyLexModel& model, std::span<const Example> data, const SimScorer& scorer);

// Validation statistics for one model: expected costs under both kinds and
// the weighted loss under `config.cost_kind`.
RiskEpochLog validation_stats(const ToyLexModel& model, std::span<const Example> valid,
                              const SimScorer& scorer, const RiskTrainConfig& config);

RiskTrainResult train_risk(ToyLexModel model, std::span<const Example> train,
                           std::span<const Example> valid, const RiskTrainConfig& config,
                           const SimScorer& scorer);

void write_toylex(std::ostream& os, const ToyLexModel& model);
ToyLexModel read_toylex(std::istream& is);
void save_toylex(const std::string& path, const ToyLexModel& model);
ToyLexModel load_toylex(const std::string& path);

// CSV "epoch,lr,expected_bleu_cost,expected_simile_cost,val_weighted_loss".
void write_risk_log(std::ostream& os, const std::vector<RiskEpochLog>& log);

}  // namespace simile
