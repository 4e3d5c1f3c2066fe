#include "simile/riskopt.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>

namespace simile {

namespace {

std::unordered_map<std::string, int> make_index(const std::vector<std::string>& vocab, const char* what) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (!index.emplace(vocab[i], static_cast<int>(i)).second)
      throw DataError(std::string("toy model: duplicate ") + what + " token '" + vocab[i] + "'");
  return index;
}

TokenIds lookup(const std::unordered_map<std::string, int>& index, const Tokens& toks, const char* what) {
  TokenIds out;
  out.reserve(toks.size());
  for (const auto& t : toks) {
    auto it = index.find(t);
    if (it == index.end()) throw DataError(std::string("unknown ") + what + " token '" + t + "'");
    out.push_back(it->second);
  }
  return out;
}

void check_list(const NBestList& list) {
  if (list.candidates.empty()) throw DataError("n-best list " + std::to_string(list.index) + " is empty");
}

// Recomputes candidate logprobs under `model`.
std::vector<TokenIds> candidate_ids(const ToyLexModel& model, const NBestList& list) {
  std::vector<TokenIds> out;
  out.reserve(list.candidates.size());
  for (const auto& c : list.candidates) {
    if (c.tokens.size() != list.source.size())
      throw DataError("candidate length differs from source length");
    out.push_back(model.target_ids(c.tokens));
  }
  return out;
}

void run_batches(ToyLexModel& model, std::span<const Example> data, std::vector<std::size_t>& order,
                 std::mt19937_64& rng, std::size_t batch_size, const OptimizerConfig& opt,
                 NesterovState<double>& state, auto&& batch_grad) {
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    std::vector<const Example*> batch;
    for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
    RowMatrix<double> grad = batch_grad(batch);
    nesterov_step(model.theta(), grad, state, opt);
  }
}

void check_optimizer(const OptimizerConfig& opt) {
  if (!(opt.learning_rate >= 0.0) || !std::isfinite(opt.learning_rate))
    throw UsageError("learning rate must be finite and non-negative");
  if (!(opt.momentum >= 0.0 && opt.momentum < 1.0)) throw UsageError("momentum must be in [0, 1)");
  if (!(opt.clip_norm > 0.0)) throw UsageError("clip norm must be > 0");
}

void check_anneal(double factor, double floor) {
  if (!(factor > 1.0)) throw UsageError("anneal factor must be > 1");
  if (!(floor > 0.0)) throw UsageError("anneal floor must be > 0");
}

}  // namespace

ToyLexModel::ToyLexModel(std::vector<std::string> source_vocab, std::vector<std::string> target_vocab,
                         RowMatrix<double> theta)
    : source_vocab_(std::move(source_vocab)),
      target_vocab_(std::move(target_vocab)),
      source_index_(make_index(source_vocab_, "source")),
      target_index_(make_index(target_vocab_, "target")),
      theta_(std::move(theta)) {
  if (theta_.rows() != static_cast<Eigen::Index>(source_vocab_.size()) ||
      theta_.cols() != static_cast<Eigen::Index>(target_vocab_.size()))
    throw DataError("toy model: theta shape does not match vocabularies");
  if (target_vocab_.empty()) throw DataError("toy model: empty target vocabulary");
  if (!theta_.allFinite()) throw DataError("toy model: non-finite theta");
}

ToyLexModel ToyLexModel::zeros(std::vector<std::string> source_vocab, std::vector<std::string> target_vocab) {
  RowMatrix<double> theta = RowMatrix<double>::Zero(static_cast<Eigen::Index>(source_vocab.size()),
                                                    static_cast<Eigen::Index>(target_vocab.size()));
  return ToyLexModel(std::move(source_vocab), std::move(target_vocab), std::move(theta));
}

TokenIds ToyLexModel::source_ids(const Tokens& x) const { return lookup(source_index_, x, "source"); }
TokenIds ToyLexModel::target_ids(const Tokens& u) const { return lookup(target_index_, u, "target"); }

Tokens ToyLexModel::target_tokens(std::span<const int> ids) const {
  Tokens out;
  for (int id : ids) out.push_back(target_vocab_.at(static_cast<std::size_t>(id)));
  return out;
}

RowMatrix<double> ToyLexModel::position_log_probs(std::span<const int> x) const {
  RowMatrix<double> rows(static_cast<Eigen::Index>(x.size()), theta_.cols());
  for (std::size_t j = 0; j < x.size(); ++j) rows.row(static_cast<Eigen::Index>(j)) = theta_.row(x[j]);
  return log_softmax_rows(rows);
}

double seq_logprob(const ToyLexModel& model, const Tokens& x, const Tokens& u) {
  if (x.size() != u.size())
    throw DataError("seq_logprob: source has " + std::to_string(x.size()) + " tokens, target " +
                    std::to_string(u.size()));
  const auto xi = model.source_ids(x);
  const auto ui = model.target_ids(u);
  const auto lp = model.position_log_probs(xi);
  double total = 0.0;
  for (std::size_t j = 0; j < ui.size(); ++j) total += lp(static_cast<Eigen::Index>(j), ui[j]);
  return total;
}

NBestList nbest(const ToyLexModel& model, const Tokens& x, std::size_t k, const std::optional<Tokens>& reference) {
  if (k < 1) throw UsageError("nbest: k must be >= 1");
  if (x.empty()) throw DataError("nbest: empty source sentence");
  const auto xi = model.source_ids(x);
  const auto lp = model.position_log_probs(xi);
  const std::size_t n = xi.size();
  const auto vocab = static_cast<int>(model.target_vocab().size());

  // Per-position target ids, best first, equal scores by ascending id.
  std::vector<std::vector<int>> ranked(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& r = ranked[j];
    r.resize(static_cast<std::size_t>(vocab));
    std::iota(r.begin(), r.end(), 0);
    const auto row = static_cast<Eigen::Index>(j);
    std::stable_sort(r.begin(), r.end(), [&](int a, int b) { return lp(row, a) > lp(row, b); });
  }

  struct State {
    double score;
    TokenIds ids;
    std::vector<int> ranks;
  };
  auto make_state = [&](std::vector<int> ranks) {
    State s{0.0, TokenIds(n), std::move(ranks)};
    for (std::size_t j = 0; j < n; ++j) {
      s.ids[j] = ranked[j][static_cast<std::size_t>(s.ranks[j])];
      s.score += lp(static_cast<Eigen::Index>(j), s.ids[j]);
    }
    return s;
  };
  // Successors only lower one position's score, so popping best-first yields
  // sequences in exact order.
  auto worse = [](const State& a, const State& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.ids > b.ids;
  };
  std::priority_queue<State, std::vector<State>, decltype(worse)> frontier(worse);
  std::set<std::vector<int>> seen;
  std::vector<int> origin(n, 0);
  seen.insert(origin);
  frontier.push(make_state(origin));

  NBestList list;
  list.source = x;
  if (reference) list.reference = *reference;
  while (!frontier.empty() && list.candidates.size() < k) {
    State top = frontier.top();
    frontier.pop();
    for (std::size_t j = 0; j < n; ++j) {
      if (top.ranks[j] + 1 >= vocab) continue;
      auto next = top.ranks;
      ++next[j];
      if (seen.insert(next).second) frontier.push(make_state(std::move(next)));
    }
    Tokens toks = model.target_tokens(top.ids);
    if (reference && toks == *reference) continue;
    list.candidates.push_back({std::move(toks), top.score, 0.0});
  }
  list.exhausted = list.candidates.size() < k;
  return list;
}

void score_candidates(NBestList& list, CostKind kind, const SimScorer& scorer) {
  if (list.reference.empty()) throw DataError("score_candidates: n-best list has no reference");
  for (auto& c : list.candidates) c.cost = scorer.cost(kind, list.reference, c.tokens);
}

std::vector<double> candidate_posteriors(const NBestList& list) {
  check_list(list);
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& c : list.candidates) m = std::max(m, c.logprob);
  std::vector<double> p;
  p.reserve(list.candidates.size());
  double z = 0.0;
  for (const auto& c : list.candidates) {
    p.push_back(std::exp(c.logprob - m));
    z += p.back();
  }
  for (auto& v : p) v /= z;
  return p;
}

double risk_loss(const NBestList& list) {
  const auto p = candidate_posteriors(list);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) loss += p[i] * list.candidates[i].cost;
  return loss;
}

std::vector<double> risk_grad(const NBestList& list) {
  const auto p = candidate_posteriors(list);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) loss += p[i] * list.candidates[i].cost;
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (list.candidates[i].cost - loss);
  return g;
}

RowMatrix<double> risk_theta_grad(const ToyLexModel& model, const NBestList& list) {
  check_list(list);
  const auto xi = model.source_ids(list.source);
  const auto lp = model.position_log_probs(xi);
  const auto ids = candidate_ids(model, list);
  NBestList fresh = list;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) s += lp(static_cast<Eigen::Index>(j), ids[i][j]);
    fresh.candidates[i].logprob = s;
  }
  const auto g = risk_grad(fresh);
  const RowMatrix<double> probs = lp.array().exp();
  RowMatrix<double> grad = RowMatrix<double>::Zero(model.theta().rows(), model.theta().cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < xi.size(); ++j) {
      grad.row(xi[j]) -= g[i] * probs.row(static_cast<Eigen::Index>(j));
      grad(xi[j], ids[i][j]) += g[i];
    }
  }
  return grad;
}

double token_ls_loss(const ToyLexModel& model, const Tokens& x, const Tokens& reference, double epsilon) {
  if (x.size() != reference.size()) throw DataError("token_ls_loss: source/reference length mismatch");
  const auto xi = model.source_ids(x);
  const auto ui = model.target_ids(reference);
  const auto lp = model.position_log_probs(xi);
  const double uniform = epsilon / static_cast<double>(lp.cols());
  double loss = 0.0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    loss -= (1.0 - epsilon) * lp(row, ui[j]) + uniform * lp.row(row).sum();
  }
  return loss;
}

RowMatrix<double> token_ls_grad(const ToyLexModel& model, const Tokens& x, const Tokens& reference,
                                double epsilon) {
  if (x.size() != reference.size()) throw DataError("token_ls_grad: source/reference length mismatch");
  const auto xi = model.source_ids(x);
  const auto ui = model.target_ids(reference);
  const auto lp = model.position_log_probs(xi);
  const double uniform = epsilon / static_cast<double>(lp.cols());
  RowMatrix<double> grad = RowMatrix<double>::Zero(model.theta().rows(), model.theta().cols());
  for (std::size_t j = 0; j < xi.size(); ++j) {
    grad.row(xi[j]) += lp.row(static_cast<Eigen::Index>(j)).array().exp().matrix();
    grad.row(xi[j]).array() -= uniform;
    grad(xi[j], ui[j]) -= 1.0 - epsilon;
  }
  return grad;
}

double weighted_loss(const ToyLexModel& model, std::span<const NBestList> batch, double gamma, double epsilon) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must be in [0, 1]");
  if (batch.empty()) throw DataError("weighted_loss: empty batch");
  double total = 0.0;
  for (const auto& list : batch) {
    double tok = gamma > 0.0 ? token_ls_loss(model, list.source, list.reference, epsilon) : 0.0;
    double risk = gamma < 1.0 ? risk_loss(list) : 0.0;
    total += gamma * tok + (1.0 - gamma) * risk;
  }
  return total / static_cast<double>(batch.size());
}

RowMatrix<double> weighted_grad(const ToyLexModel& model, std::span<const NBestList> batch, double gamma,
                                double epsilon) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must be in [0, 1]");
  if (batch.empty()) throw DataError("weighted_grad: empty batch");
  RowMatrix<double> grad = RowMatrix<double>::Zero(model.theta().rows(), model.theta().cols());
  for (const auto& list : batch) {
    if (gamma > 0.0) grad += gamma * token_ls_grad(model, list.source, list.reference, epsilon);
    if (gamma < 1.0) grad += (1.0 - gamma) * risk_theta_grad(model, list);
  }
  return grad / static_cast<double>(batch.size());
}

void MleTrainConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("label smoothing must be in [0, 1]");
  check_optimizer(optimizer);
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  check_anneal(anneal_factor, anneal_floor);
}

void RiskTrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must be in [0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("label smoothing must be in [0, 1]");
  if (k < 1) throw UsageError("n-best size must be >= 1");
  check_optimizer(optimizer);
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  check_anneal(anneal_factor, anneal_floor);
}

MleTrainResult train_mle(ToyLexModel model, std::span<const Example> train, std::span<const Example> valid,
                         const MleTrainConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("train_mle: empty training set");
  auto val_loss = [&](const ToyLexModel& m) {
    std::span<const Example> set = valid.empty() ? train : valid;
    double total = 0.0;
    for (const auto& ex : set) total += token_ls_loss(m, ex.source, ex.reference, config.epsilon);
    total /= static_cast<double>(set.size());
    if (!std::isfinite(total)) throw NumericalError("train_mle: validation loss is not finite");
    return total;
  };

  MleTrainResult result;
  result.model = model;
  double best = val_loss(model);
  result.log.push_back({0, config.optimizer.learning_rate, best});

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  NesterovState<double> state;
  OptimizerConfig opt = config.optimizer;
  auto grad_fn = [&](const std::vector<const Example*>& batch) {
    RowMatrix<double> g = RowMatrix<double>::Zero(model.theta().rows(), model.theta().cols());
    for (const auto* ex : batch) g += token_ls_grad(model, ex->source, ex->reference, config.epsilon);
    return RowMatrix<double>(g / static_cast<double>(batch.size()));
  };
  auto epoch = [&](std::size_t e) {
    run_batches(model, train, order, rng, config.batch_size, opt, state, grad_fn);
    const double v = val_loss(model);
    result.log.push_back({e, opt.learning_rate, v});
    if (v < best) {
      best = v;
      result.model = model;
      result.best_epoch = e;
    }
  };
  std::size_t e = 0;
  while (e < config.epochs) epoch(++e);
  if (config.anneal) {
    while ((opt.learning_rate /= config.anneal_factor) >= config.anneal_floor) epoch(++e);
  }
  return result;
}

Tokens decode_best(const ToyLexModel& model, const Tokens& x) {
  return nbest(model, x, 1).candidates.front().tokens;
}

DecodeEval evaluate_decode(const ToyLexModel& model, std::span<const Example> data, const SimScorer& scorer) {
  std::vector<Tokens> refs, hyps;
  for (const auto& ex : data) {
    refs.push_back(ex.reference);
    hyps.push_back(decode_best(model, ex.source));
  }
  return {corpus_bleu(refs, hyps, scorer.config().max_ngram), scorer.corpus_sim(refs, hyps)};
}

RiskEpochLog validation_stats(const ToyLexModel& model, std::span<const Example> valid,
                              const SimScorer& scorer, const RiskTrainConfig& config) {
  if (valid.empty()) throw DataError("validation split is empty");
  RiskEpochLog out;
  for (const auto& ex : valid) {
    NBestList list = nbest(model, ex.source, config.k, ex.reference);
    std::vector<double> bleu_cost, simile_cost;
    for (const auto& c : list.candidates) {
      bleu_cost.push_back(scorer.cost(CostKind::kBleu, ex.reference, c.tokens));
      simile_cost.push_back(scorer.cost(CostKind::kSimile, ex.reference, c.tokens));
    }
    const auto p = candidate_posteriors(list);
    double eb = 0.0, es = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      eb += p[i] * bleu_cost[i];
      es += p[i] * simile_cost[i];
    }
    double risk = config.cost_kind == CostKind::kBleu     ? eb
                  : config.cost_kind == CostKind::kSimile ? es
                                                          : 0.5 * (eb + es);
    const double tok =
        config.gamma > 0.0 ? token_ls_loss(model, ex.source, ex.reference, config.epsilon) : 0.0;
    out.expected_bleu_cost += eb;
    out.expected_simile_cost += es;
    out.val_weighted_loss += config.gamma * tok + (1.0 - config.gamma) * risk;
  }
  const double n = static_cast<double>(valid.size());
  out.expected_bleu_cost /= n;
  out.expected_simile_cost /= n;
  out.val_weighted_loss /= n;
  if (!std::isfinite(out.val_weighted_loss))
    throw NumericalError("train_risk: validation loss is not finite (diverged)");
  return out;
}

RiskTrainResult train_risk(ToyLexModel model, std::span<const Example> train, std::span<const Example> valid,
                           const RiskTrainConfig& config, const SimScorer& scorer) {
  config.validate();
  if (train.empty()) throw DataError("train_risk: empty training set");
  RiskTrainResult result;
  OptimizerConfig opt = config.optimizer;

  auto log_epoch = [&](std::size_t e) {
    RiskEpochLog entry = validation_stats(model, valid, scorer, config);
    entry.epoch = e;
    entry.learning_rate = opt.learning_rate;
    result.log.push_back(entry);
    if (e == 0 || entry.val_weighted_loss < result.log[result.best_epoch].val_weighted_loss) {
      result.best_epoch = e;
      result.model = model;
    }
  };
  log_epoch(0);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  NesterovState<double> state;
  auto grad_fn = [&](const std::vector<const Example*>& batch) {
    std::vector<NBestList> lists;
    lists.reserve(batch.size());
    for (const auto* ex : batch) {
      lists.push_back(nbest(model, ex->source, config.k, ex->reference));
      score_candidates(lists.back(), config.cost_kind, scorer);
    }
    return weighted_grad(model, lists, config.gamma, config.epsilon);
  };
  auto epoch = [&](std::size_t e) {
    run_batches(model, train, order, rng, config.batch_size, opt, state, grad_fn);
    log_epoch(e);
    if (e == 1) result.after_first_epoch = evaluate_decode(model, valid, scorer);
  };
  std::size_t e = 0;
  while (e < config.epochs) epoch(++e);
  if (config.anneal) {
    while ((opt.learning_rate /= config.anneal_factor) >= config.anneal_floor) epoch(++e);
  }
  result.final_model = model;
  result.selected_eval = evaluate_decode(result.model, valid, scorer);
  return result;
}

void write_toylex(std::ostream& os, const ToyLexModel& model) {
  os << "toylex v1 " << model.theta().rows() << ' ' << model.theta().cols() << '\n';
  os << join_words(model.source_vocab()) << '\n' << join_words(model.target_vocab()) << '\n';
  for (Eigen::Index r = 0; r < model.theta().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.theta().cols(); ++c) {
      if (c) os << ' ';
      os << format_double(model.theta()(r, c));
    }
    os << '\n';
  }
}

ToyLexModel read_toylex(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("toy model: missing header");
  std::istringstream header(line);
  std::string magic, version;
  long rows = -1, cols = -1;
  if (!(header >> magic >> version >> rows >> cols) || magic != "toylex" || version != "v1" || rows < 0 || cols < 1)
    throw DataError("toy model: line 1: expected 'toylex v1 <sources> <targets>'");
  std::string src, tgt;
  if (!std::getline(is, src) || !std::getline(is, tgt)) throw DataError("toy model: missing vocabulary lines");
  auto sv = split_words(src), tv = split_words(tgt);
  if (static_cast<long>(sv.size()) != rows) throw DataError("toy model: line 2: source vocabulary size mismatch");
  if (static_cast<long>(tv.size()) != cols) throw DataError("toy model: line 3: target vocabulary size mismatch");
  RowMatrix<double> theta(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const std::string where = "toy model: line " + std::to_string(r + 4);
    if (!std::getline(is, line)) throw DataError(where + ": missing row");
    auto vals = split_words(line);
    if (static_cast<long>(vals.size()) != cols) throw DataError(where + ": wrong number of values");
    for (long c = 0; c < cols; ++c)
      if (!parse_double(vals[static_cast<std::size_t>(c)], theta(r, c))) throw DataError(where + ": bad number");
  }
  return ToyLexModel(std::move(sv), std::move(tv), std::move(theta));
}

void save_toylex(const std::string& path, const ToyLexModel& model) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  write_toylex(os, model);
}

ToyLexModel load_toylex(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  return read_toylex(is);
}

void write_risk_log(std::ostream& os, const std::vector<RiskEpochLog>& log) {
  os << "epoch,lr,expected_bleu_cost,expected_simile_cost,val_weighted_loss\n";
  for (const auto& e : log)
    os << e.epoch << ',' << format_double(e.learning_rate) << ',' << format_double(e.expected_bleu_cost) << ','
       << format_double(e.expected_simile_cost) << ',' << format_double(e.val_weighted_loss) << '\n';
}

}  // namespace simile
