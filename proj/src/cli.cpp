#include "simile/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simile/analysis.hpp"
#include "simile/data.hpp"
#include "simile/error.hpp"
#include "simile/metrics.hpp"
#include "simile/riskopt.hpp"
#include "simile/simembed.hpp"
#include "simile/subword.hpp"
#include "simile/synthetic.hpp"

namespace simile {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct Options {
  std::uint64_t seed = 1;
  std::string out_dir = "simile-out";

  // shared inputs
  std::string corpus, input, pairs, bpe, emb, emb_init, refs, hyps, hyps_a, hyps_b, nbest, values, judgments, tags,
      freq_source, model, init, train_src, train_ref, valid_src, valid_ref;
  std::vector<std::string> multi_refs, multi_hyps, multi_hyps_b;

  std::size_t vocab_size = kDefaultSimVocab;
  std::string marker = std::string(kDefaultEndOfWord);

  SimTrainConfig sim;
  int dim = kDefaultEmbeddingDim;

  double alpha = 0.25;
  int max_ngram = 4;
  bool scale_hundred = false;
  std::string lp_unit = "words";

  FilterConfig filter;

  MleTrainConfig mle;
  bool mle_no_anneal = false;

  RiskTrainConfig risk;
  std::string cost = "simile";
  bool risk_no_anneal = false;
  std::vector<std::size_t> sweep_ks{2, 4, 8, 16};

  double bin_width = 0.02;
  std::vector<std::string> pair_metrics{"bleu", "simile"};
  std::size_t extremes = 2;
  std::string metric = "bleu";
  std::size_t samples = 1000;

  SyntheticTaskConfig synthetic;
  std::size_t paraphrase_pairs = 40;
};

class Session {
 public:
  Session(std::string command, const Options& opts, CLI::App* sub, std::ostream& out)
      : command_(std::move(command)), opts_(opts), out_(out) {
    fs::create_directories(opts.out_dir);
    manifest_["tool"] = "simile";
    manifest_["version"] = kVersion;
    manifest_["command"] = command_;
    manifest_["seed"] = opts.seed;
    Json flags = Json::object();
    for (const CLI::Option* opt : sub->get_options()) {
      const std::string name = opt->get_name();
      if (name.empty() || name == "--help") continue;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        flags[name] = res.size() == 1 ? Json(res.front()) : Json(res);
      } else if (!opt->get_default_str().empty()) {
        flags[name] = opt->get_default_str();
      }
    }
    manifest_["flags"] = flags;
    manifest_["outputs"] = Json::array();
  }

  std::string path(const std::string& file) {
    manifest_["outputs"].push_back(file);
    return (fs::path(opts_.out_dir) / file).string();
  }

  void write_text(const std::string& file, const std::string& content) {
    std::ofstream os(path(file));
    if (!os) throw DataError("cannot write " + (fs::path(opts_.out_dir) / file).string());
    os << content;
  }

  void write_json(const std::string& file, const Json& j) { write_text(file, j.dump(2) + "\n"); }

  std::ostream& out() { return out_; }

  void finish() {
    std::ofstream os(fs::path(opts_.out_dir) / "manifest.json");
    if (!os) throw DataError("cannot write manifest in " + opts_.out_dir);
    os << manifest_.dump(2) << '\n';
  }

 private:
  std::string command_;
  const Options& opts_;
  std::ostream& out_;
  Json manifest_;
};

MetricConfig metric_config(const Options& o) {
  MetricConfig cfg;
  cfg.alpha = o.alpha;
  cfg.max_ngram = o.max_ngram;
  cfg.scale_hundred = o.scale_hundred;
  if (o.lp_unit == "words") {
    cfg.lp_unit = LengthUnit::kWords;
  } else if (o.lp_unit == "subwords") {
    cfg.lp_unit = LengthUnit::kSubwords;
  } else {
    throw UsageError("--lp-unit must be 'words' or 'subwords'");
  }
  cfg.validate();
  return cfg;
}

SimScorer make_scorer(const Options& o) {
  if (o.emb.empty()) throw UsageError("--emb is required");
  std::optional<BpeModel> bpe;
  if (!o.bpe.empty()) bpe = load_bpe(o.bpe);
  return SimScorer(load_embeddings(o.emb), std::move(bpe), metric_config(o));
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Attaches references (by sentence index) to n-best lists read from disk.
std::vector<NBestList> nbest_with_refs(const Options& o) {
  auto lists = load_nbest(o.nbest);
  auto refs = load_sentences(o.refs);
  for (auto& l : lists) {
    if (l.index >= refs.size())
      throw DataError(o.nbest + ": sentence index " + std::to_string(l.index) + " has no reference in " + o.refs);
    l.reference = refs[l.index];
  }
  return lists;
}

double pick_score(const std::string& metric, const SimScorer* scorer, const Tokens& r, const Tokens& h) {
  if (metric == "bleu") return sentence_bleu_smoothed(r, h);
  if (!scorer) throw UsageError("metric '" + metric + "' needs --emb");
  if (metric == "sim") return scorer->sim(r, h);
  if (metric == "simile") return scorer->simile(r, h);
  throw UsageError("unknown metric '" + metric + "' (expected bleu, sim or simile)");
}

Json stats_json(const PairDiffStats& s) {
  return {{"total_pairs", s.total_pairs},
          {"distinct_fraction", s.distinct_fraction},
          {"mean_abs_diff_x100", s.mean_abs_diff_x100}};
}

Json buckets_json(const std::vector<BucketScore>& buckets) {
  Json arr = Json::array();
  for (const auto& b : buckets)
    arr.push_back({{"bucket", b.label},
                   {"matches", b.matches},
                   {"ref_count", b.ref_count},
                   {"hyp_count", b.hyp_count},
                   {"precision", b.precision},
                   {"recall", b.recall},
                   {"f1", b.f1}});
  return arr;
}

Json deltas_json(const std::vector<BucketDelta>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows)
    arr.push_back({{"bucket", r.label}, {"f1_a", r.f1_a}, {"f1_b", r.f1_b}, {"delta_x100", 100.0 * r.delta}});
  return arr;
}

void print_buckets(std::ostream& os, const std::string& title, const std::vector<BucketScore>& buckets) {
  os << title << "\n";
  os << "bucket\tP\tR\tF1\n";
  for (const auto& b : buckets)
    os << b.label << '\t' << fixed(b.precision, 4) << '\t' << fixed(b.recall, 4) << '\t' << fixed(b.f1, 4) << '\n';
}

std::vector<Example> examples_from(const std::string& src, const std::string& ref) {
  if (src.empty() || ref.empty()) return {};
  return load_parallel(src, ref).examples();
}

RiskTrainConfig risk_config(const Options& o) {
  RiskTrainConfig cfg = o.risk;
  cfg.cost_kind = parse_cost_kind(o.cost);
  cfg.anneal = !o.risk_no_anneal;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

Json decode_json(const DecodeEval& e) { return {{"corpus_bleu", e.corpus_bleu}, {"corpus_sim", e.corpus_sim}}; }

// --- commands -------------------------------------------------------------

void cmd_learn_bpe(const Options& o, Session& s) {
  auto lines = read_lines(o.corpus);
  BpeModel model = learn_bpe(lines, o.vocab_size, o.marker);
  save_bpe(s.path("bpe.model"), model);
  s.out() << "merges\t" << model.merges().size() << "\nvocab\t" << model.vocab().size() << "\n";
}

void cmd_segment(const Options& o, Session& s) {
  BpeModel model = load_bpe(o.bpe);
  std::ostringstream os;
  for (const auto& line : read_lines(o.input)) os << join_words(segment(model, line)) << '\n';
  s.write_text("segmented.txt", os.str());
  s.out() << os.str();
}

void cmd_train_sim(const Options& o, Session& s) {
  auto raw = load_pairs(o.pairs);
  std::optional<BpeModel> bpe;
  if (!o.bpe.empty()) bpe = load_bpe(o.bpe);
  std::vector<ParaphrasePair> pairs;
  std::vector<std::string> vocab;
  for (const auto& p : raw) {
    ParaphrasePair q = bpe ? ParaphrasePair{segment(*bpe, join_words(p.s)), segment(*bpe, join_words(p.s_prime))} : p;
    vocab.insert(vocab.end(), q.s.begin(), q.s.end());
    vocab.insert(vocab.end(), q.s_prime.begin(), q.s_prime.end());
    pairs.push_back(std::move(q));
  }
  if (bpe)
    for (const auto& [tok, id] : bpe->vocab()) vocab.push_back(tok);
  SimTrainConfig cfg = o.sim;
  cfg.seed = o.seed;
  EmbeddingTable init = o.emb_init.empty() ? EmbeddingTable::random(vocab, o.dim, o.seed) : load_embeddings(o.emb_init);
  const double before = paraphrase_separation(init, pairs);
  SimTrainResult res = train_sim(std::move(init), pairs, cfg);
  save_embeddings(s.path("sim.emb"), res.table);
  std::ostringstream log;
  log << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < res.loss_log.size(); ++e) log << e << ',' << format_double(res.loss_log[e]) << '\n';
  s.write_text("train_sim_log.csv", log.str());
  const double after = paraphrase_separation(res.table, pairs);
  s.write_json("train_sim_summary.json", {{"pairs", pairs.size()},
                                          {"initial_loss", res.loss_log.front()},
                                          {"final_loss", res.loss_log.back()},
                                          {"separation_before", before},
                                          {"separation_after", after}});
  s.out() << log.str() << "separation\t" << fixed(before, 4) << " -> " << fixed(after, 4) << "\n";
}

void cmd_score(const Options& o, Session& s) {
  SimScorer scorer = make_scorer(o);
  auto refs = load_sentences(o.refs);
  auto hyps = load_sentences(o.hyps);
  if (refs.size() != hyps.size())
    throw DataError("score: " + o.refs + " and " + o.hyps + " have different line counts");
  const double scale = o.scale_hundred ? 100.0 : 1.0;
  const int digits = o.scale_hundred ? 2 : 4;
  std::ostringstream os;
  os << "index\tbleu\tsim\tsimile\tlp\n";
  double sum_simile = 0.0, sum_lp = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double b = scorer.bleu(refs[i], hyps[i]);
    const double sm = scorer.sim(refs[i], hyps[i]);
    const double lp = scorer.length_penalty(refs[i], hyps[i]);
    const double sl = scorer.simile(refs[i], hyps[i]);
    sum_simile += sl;
    sum_lp += lp;
    os << i << '\t' << fixed(scale * b, digits) << '\t' << fixed(scale * sm, digits) << '\t'
       << fixed(scale * sl, digits) << '\t' << fixed(lp, 4) << '\n';
  }
  const double cb = corpus_bleu(refs, hyps, o.max_ngram);
  const double cs = scorer.corpus_sim(refs, hyps);
  const double n = static_cast<double>(refs.size());
  os << "corpus\t" << fixed(scale * cb, digits) << '\t' << fixed(scale * cs, digits) << '\t'
     << fixed(scale * sum_simile / n, digits) << '\t' << fixed(sum_lp / n, 4) << '\n';
  s.write_text("scores.tsv", os.str());
  s.write_json("score_summary.json", {{"sentences", refs.size()},
                                      {"corpus_bleu", cb},
                                      {"corpus_sim", cs},
                                      {"mean_simile", sum_simile / n},
                                      {"scale_hundred", o.scale_hundred}});
  s.out() << os.str();
}

void cmd_filter(const Options& o, Session& s) {
  SimScorer scorer = make_scorer(o);
  auto pairs = load_pairs(o.pairs);
  FilterResult res = paranmt_filter(pairs, scorer, o.filter);
  save_pairs(s.path("filtered.tsv"), res.kept);
  Json j = {{"input", res.stats.input},
            {"kept", res.stats.kept},
            {"rejected_sim", res.stats.rejected_sim},
            {"rejected_overlap", res.stats.rejected_overlap},
            {"rejected_both", res.stats.rejected_both}};
  s.write_json("filter_stats.json", j);
  s.out() << "input\t" << res.stats.input << "\nkept\t" << res.stats.kept << "\nrejected_sim\t"
          << res.stats.rejected_sim << "\nrejected_overlap\t" << res.stats.rejected_overlap << "\nrejected_both\t"
          << res.stats.rejected_both << "\n";
}

void cmd_mle_train(const Options& o, Session& s) {
  auto train = examples_from(o.train_src, o.train_ref);
  auto valid = examples_from(o.valid_src, o.valid_ref);
  ToyLexModel model;
  if (!o.init.empty()) {
    model = load_toylex(o.init);
  } else {
    std::set<std::string> src, tgt;
    for (const auto* set : {&train, &valid})
      for (const auto& ex : *set) {
        src.insert(ex.source.begin(), ex.source.end());
        tgt.insert(ex.reference.begin(), ex.reference.end());
      }
    model = ToyLexModel::zeros({src.begin(), src.end()}, {tgt.begin(), tgt.end()});
  }
  MleTrainConfig cfg = o.mle;
  cfg.anneal = !o.mle_no_anneal;
  cfg.seed = o.seed;
  MleTrainResult res = train_mle(std::move(model), train, valid, cfg);
  save_toylex(s.path("mle.model"), res.model);
  std::ostringstream log;
  log << "epoch,lr,val_token_loss\n";
  for (const auto& e : res.log)
    log << e.epoch << ',' << format_double(e.learning_rate) << ',' << format_double(e.val_token_loss) << '\n';
  s.write_text("mle_log.csv", log.str());
  s.out() << "best_epoch\t" << res.best_epoch << "\nval_token_loss\t"
          << fixed(res.log[res.best_epoch].val_token_loss, 6) << "\n";
}

struct RiskRun {
  RiskTrainResult result;
  Json summary;
};

RiskRun run_risk(const Options& o, const RiskTrainConfig& cfg) {
  if (o.model.empty()) throw UsageError("--model is required");
  ToyLexModel model = load_toylex(o.model);
  auto train = examples_from(o.train_src, o.train_ref);
  auto valid = examples_from(o.valid_src, o.valid_ref);
  if (valid.empty()) throw UsageError("--valid-src and --valid-ref are required");
  SimScorer scorer = make_scorer(o);
  RiskRun run{train_risk(std::move(model), train, valid, cfg, scorer), {}};
  const auto& r = run.result;
  const auto& best = r.log[r.best_epoch];
  run.summary = {{"k", cfg.k},
                 {"cost", std::string(to_string(cfg.cost_kind))},
                 {"best_epoch", r.best_epoch},
                 {"selected", decode_json(r.selected_eval)},
                 {"expected_bleu_cost", best.expected_bleu_cost},
                 {"expected_simile_cost", best.expected_simile_cost},
                 {"val_weighted_loss", best.val_weighted_loss}};
  if (r.after_first_epoch) run.summary["after_first_epoch"] = decode_json(*r.after_first_epoch);
  return run;
}

void cmd_risk_train(const Options& o, Session& s) {
  RiskTrainConfig cfg = risk_config(o);
  RiskRun run = run_risk(o, cfg);
  save_toylex(s.path("risk.model"), run.result.model);
  std::ostringstream log;
  write_risk_log(log, run.result.log);
  s.write_text("risk_log.csv", log.str());
  s.write_json("risk_summary.json", run.summary);
  s.out() << log.str() << "selected_epoch\t" << run.result.best_epoch << "\ncorpus_bleu\t"
          << fixed(100.0 * run.result.selected_eval.corpus_bleu, 2) << "\ncorpus_sim\t"
          << fixed(100.0 * run.result.selected_eval.corpus_sim, 2) << "\n";
}

void cmd_sweep(const Options& o, Session& s) {
  if (o.sweep_ks.empty()) throw UsageError("--k needs at least one value");
  std::ostringstream csv;
  csv << "k,best_epoch,corpus_bleu,corpus_sim,expected_bleu_cost,expected_simile_cost\n";
  Json runs = Json::array();
  for (std::size_t k : o.sweep_ks) {
    RiskTrainConfig cfg = risk_config(o);
    cfg.k = k;
    RiskRun run = run_risk(o, cfg);
    const auto& r = run.result;
    const auto& best = r.log[r.best_epoch];
    csv << k << ',' << r.best_epoch << ',' << format_double(r.selected_eval.corpus_bleu) << ','
        << format_double(r.selected_eval.corpus_sim) << ',' << format_double(best.expected_bleu_cost) << ','
        << format_double(best.expected_simile_cost) << '\n';
    runs.push_back(run.summary);
  }
  s.write_text("sweep.csv", csv.str());
  s.write_json("sweep.json", runs);
  s.out() << csv.str();
}

void cmd_decode_nbest(const Options& o, Session& s) {
  ToyLexModel model = load_toylex(o.model);
  auto sources = load_sentences(o.input);
  std::vector<Tokens> refs;
  if (!o.refs.empty()) {
    refs = load_sentences(o.refs);
    if (refs.size() != sources.size())
      throw DataError("decode-nbest: " + o.input + " and " + o.refs + " have different line counts");
  }
  std::vector<NBestList> lists;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto ref = refs.empty() ? std::optional<Tokens>() : std::optional<Tokens>(refs[i]);
    lists.push_back(nbest(model, sources[i], o.risk.k, ref));
    lists.back().index = i;
  }
  save_nbest(s.path("nbest.txt"), lists);
  std::size_t total = 0;
  for (const auto& l : lists) total += l.candidates.size();
  s.out() << "sentences\t" << lists.size() << "\ncandidates\t" << total << "\n";
}

void cmd_hist(const Options& o, Session& s) {
  std::vector<double> costs;
  if (!o.values.empty()) {
    std::size_t lineno = 0;
    for (const auto& line : read_lines(o.values)) {
      ++lineno;
      if (normalize_whitespace(line).empty()) continue;
      double v = 0.0;
      if (!parse_double(normalize_whitespace(line), v))
        throw DataError(o.values + ": line " + std::to_string(lineno) + ": not a number");
      costs.push_back(v);
    }
  } else {
    if (o.nbest.empty() || o.refs.empty()) throw UsageError("analyze-hist needs --values or --nbest with --refs");
    const CostKind kind = parse_cost_kind(o.cost);
    std::optional<SimScorer> scorer;
    if (kind != CostKind::kBleu) scorer.emplace(make_scorer(o));
    for (const auto& l : nbest_with_refs(o))
      for (const auto& c : l.candidates)
        costs.push_back(kind == CostKind::kBleu ? 1.0 - sentence_bleu_smoothed(l.reference, c.tokens)
                                                : scorer->cost(kind, l.reference, c.tokens));
  }
  Histogram h = cost_histogram(costs, o.bin_width);
  std::ostringstream csv;
  write_histogram_csv(csv, h);
  s.write_text("histogram.csv", csv.str());
  Json bins = Json::array();
  for (const auto& [edge, count] : h.bins) bins.push_back({{"lower_edge", edge}, {"count", count}});
  s.write_json("histogram.json", {{"bin_width", h.bin_width}, {"total", h.total()}, {"bins", bins}});
  s.out() << csv.str();
}

void cmd_pairs(const Options& o, Session& s) {
  auto lists = nbest_with_refs(o);
  std::optional<SimScorer> scorer;
  if (!o.emb.empty()) scorer.emplace(make_scorer(o));
  Json j = Json::object();
  s.out() << "metric\ttotal_pairs\tdistinct_fraction\tmean_abs_diff_x100\n";
  for (const auto& m : o.pair_metrics) {
    auto st = nbest_pair_stats(lists, [&](const Tokens& r, const Tokens& h) {
      return pick_score(m, scorer ? &*scorer : nullptr, r, h);
    });
    j[m] = stats_json(st);
    s.out() << m << '\t' << st.total_pairs << '\t' << fixed(st.distinct_fraction, 4) << '\t'
            << fixed(st.mean_abs_diff_x100, 2) << '\n';
  }
  s.write_json("pair_stats.json", j);
}

void cmd_f1(const Options& o, Session& s) {
  if (o.multi_refs.empty() || o.multi_refs.size() != o.multi_hyps.size())
    throw UsageError("analyze-f1 needs one --hyps per --refs");
  if (!o.multi_hyps_b.empty() && o.multi_hyps_b.size() != o.multi_refs.size())
    throw UsageError("analyze-f1 needs one --hyps-b per --refs");
  std::optional<TagMap> tags;
  if (!o.tags.empty()) tags = load_tags(o.tags);
  Json corpora = Json::array();
  std::vector<F1Delta> deltas;
  for (std::size_t c = 0; c < o.multi_refs.size(); ++c) {
    auto refs = load_sentences(o.multi_refs[c]);
    auto hyps = load_sentences(o.multi_hyps[c]);
    auto freq = o.freq_source.empty() ? refs : load_sentences(o.freq_source);
    const TagMap* tp = tags ? &*tags : nullptr;
    F1Report a = lexical_f1(refs, hyps, freq, tp);
    Json entry = {{"refs", o.multi_refs[c]}, {"frequency", buckets_json(a.frequency)}};
    if (tp) entry["tags"] = buckets_json(a.tags);
    print_buckets(s.out(), "[" + o.multi_hyps[c] + "] frequency", a.frequency);
    if (tp) print_buckets(s.out(), "[" + o.multi_hyps[c] + "] tags", a.tags);
    if (!o.multi_hyps_b.empty()) {
      F1Report b = lexical_f1(refs, load_sentences(o.multi_hyps_b[c]), freq, tp);
      F1Delta d = f1_delta(a, b);
      entry["delta"] = {{"frequency", deltas_json(d.frequency)}};
      if (tp) entry["delta"]["tags"] = deltas_json(d.tags);
      deltas.push_back(std::move(d));
    }
    corpora.push_back(std::move(entry));
  }
  Json report = {{"corpora", corpora}};
  if (!deltas.empty()) {
    Json avg = Json::object();
    s.out() << "bucket\tavg_delta_x100\n";
    for (const auto& [label, v] : average_deltas(deltas)) {
      avg[label] = 100.0 * v;
      s.out() << label << '\t' << fixed(100.0 * v, 2) << '\n';
    }
    report["average_delta_x100"] = avg;
    if (tags) {
      Json tavg = Json::object();
      for (const auto& [label, v] : average_deltas(deltas, true)) tavg[label] = 100.0 * v;
      report["average_tag_delta_x100"] = tavg;
    }
  }
  s.write_json("f1.json", report);
}

void cmd_compare(const Options& o, Session& s) {
  SimScorer scorer = make_scorer(o);
  auto rows = metric_compare_sort(load_sentences(o.refs), load_sentences(o.hyps_a), load_sentences(o.hyps_b), scorer,
                                  o.extremes);
  std::ostringstream tsv;
  tsv << "index\tbleu_a\tbleu_b\tsim_a\tsim_b\tdelta_bleu\tdelta_sim\tstatistic\textreme\n";
  Json arr = Json::array();
  for (const auto& r : rows) {
    const char* flag = r.extreme == Extreme::kBleuGap ? "bleu_gap" : r.extreme == Extreme::kSimGap ? "sim_gap" : "-";
    tsv << r.index << '\t' << fixed(100 * r.bleu_a, 2) << '\t' << fixed(100 * r.bleu_b, 2) << '\t'
        << fixed(100 * r.sim_a, 2) << '\t' << fixed(100 * r.sim_b, 2) << '\t' << fixed(r.delta_bleu, 2) << '\t'
        << fixed(r.delta_sim, 2) << '\t' << fixed(r.statistic, 2) << '\t' << flag << '\n';
    arr.push_back({{"index", r.index},
                   {"delta_bleu", r.delta_bleu},
                   {"delta_sim", r.delta_sim},
                   {"statistic", r.statistic},
                   {"extreme", flag}});
  }
  s.write_text("compare.tsv", tsv.str());
  s.write_json("compare.json", arr);
  s.out() << tsv.str();
}

void cmd_correlate(const Options& o, Session& s) {
  auto records = load_judgments(o.judgments);
  std::optional<SimScorer> scorer;
  if (!o.emb.empty()) scorer.emplace(make_scorer(o));
  std::vector<std::pair<std::string, std::function<double(const Tokens&, const Tokens&)>>> metrics;
  metrics.emplace_back("bleu", [](const Tokens& r, const Tokens& h) { return sentence_bleu_smoothed(r, h); });
  metrics.emplace_back("bleu_symmetric", [](const Tokens& r, const Tokens& h) {
    return symmetric([](const Tokens& a, const Tokens& b) { return sentence_bleu_smoothed(a, b); }, r, h);
  });
  if (scorer) {
    metrics.emplace_back("sim", [&](const Tokens& r, const Tokens& h) { return scorer->sim(r, h); });
    metrics.emplace_back("simile", [&](const Tokens& r, const Tokens& h) { return scorer->simile(r, h); });
    metrics.emplace_back("simile_symmetric", [&](const Tokens& r, const Tokens& h) {
      return symmetric([&](const Tokens& a, const Tokens& b) { return scorer->simile(a, b); }, r, h);
    });
  }
  Json j = Json::object();
  s.out() << "metric\tpearson\tspearman\n";
  for (const auto& [name, fn] : metrics) {
    JudgmentSet set;
    for (const auto& rec : records) set.emplace_back(fn(rec.reference, rec.hypothesis), rec.human);
    const double p = pearson(set), r = spearman(set);
    j[name] = {{"n", set.size()}, {"pearson", p}, {"spearman", r}};
    s.out() << name << '\t' << fixed(p, 4) << '\t' << fixed(r, 4) << '\n';
  }
  s.write_json("correlate.json", j);
}

void cmd_bootstrap(const Options& o, Session& s) {
  auto refs = load_sentences(o.refs);
  auto a = load_sentences(o.hyps_a);
  auto b = load_sentences(o.hyps_b);
  std::optional<SimScorer> scorer;
  if (o.metric != "bleu") scorer.emplace(make_scorer(o));
  CorpusMetric metric;
  if (o.metric == "bleu") {
    const int n = o.max_ngram;
    metric = [n](const std::vector<Tokens>& r, const std::vector<Tokens>& h) { return corpus_bleu(r, h, n); };
  } else if (o.metric == "sim") {
    metric = [&](const std::vector<Tokens>& r, const std::vector<Tokens>& h) { return scorer->corpus_sim(r, h); };
  } else if (o.metric == "simile") {
    metric = [&](const std::vector<Tokens>& r, const std::vector<Tokens>& h) { return scorer->corpus_simile(r, h); };
  } else {
    throw UsageError("--metric must be bleu, sim or simile");
  }
  BootstrapResult res = paired_bootstrap(refs, a, b, metric, o.samples, o.seed);
  Json j = {{"metric", o.metric},   {"samples", res.samples}, {"score_a", res.score_a},
            {"score_b", res.score_b}, {"win_a", res.win_a},     {"win_b", res.win_b},
            {"ties", res.ties},       {"p_value", res.p_value}, {"significant", res.significant}};
  s.write_json("bootstrap.json", j);
  s.out() << "score_a\t" << format_double(res.score_a) << "\nscore_b\t" << format_double(res.score_b) << "\nwin_a\t"
          << format_double(res.win_a) << "\nwin_b\t" << format_double(res.win_b) << "\nties\t"
          << format_double(res.ties) << "\np_value\t" << format_double(res.p_value) << "\n";
}

void cmd_synthetic(const Options& o, Session& s) {
  SyntheticTaskConfig cfg = o.synthetic;
  cfg.seed = o.seed;
  SyntheticTask task = make_synthetic_task(cfg);
  save_parallel(s.path("train.src"), s.path("train.ref"), task.train);
  save_parallel(s.path("valid.src"), s.path("valid.ref"), task.valid);
  save_embeddings(s.path("sim.emb"), task.sim_table);
  save_pairs(s.path("paraphrases.tsv"), make_synthetic_paraphrases(o.paraphrase_pairs, 30, 5, o.seed));
  s.out() << "train\t" << task.train.size() << "\nvalid\t" << task.valid.size() << "\nsource_vocab\t"
          << task.source_vocab.size() << "\ntarget_vocab\t" << task.target_vocab.size() << "\n";
}

// --- option wiring ----------------------------------------------------------

void add_scorer_options(CLI::App* sub, Options& o, bool emb_required) {
  auto* emb = sub->add_option("--emb", o.emb, "SIM embedding file");
  if (emb_required) emb->required();
  sub->add_option("--bpe", o.bpe, "BPE model used to segment sentences for SIM");
  sub->add_option("--alpha", o.alpha, "length-penalty exponent");
  sub->add_option("--max-ngram", o.max_ngram, "BLEU n-gram order");
  sub->add_option("--lp-unit", o.lp_unit, "length unit for the SimiLe penalty (words|subwords)");
}

void add_optimizer_options(CLI::App* sub, OptimizerConfig& opt) {
  sub->add_option("--lr", opt.learning_rate, "learning rate");
  sub->add_option("--momentum", opt.momentum, "Nesterov momentum");
  sub->add_option("--clip", opt.clip_norm, "gradient norm ceiling");
}

void add_risk_options(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model, "pre-trained toy model")->required();
  sub->add_option("--train-src", o.train_src)->required();
  sub->add_option("--train-ref", o.train_ref)->required();
  sub->add_option("--valid-src", o.valid_src)->required();
  sub->add_option("--valid-ref", o.valid_ref)->required();
  add_scorer_options(sub, o, true);
  sub->add_option("--cost", o.cost, "cost function (bleu|simile|half)");
  sub->add_option("--gamma", o.risk.gamma, "weight of the token-level loss");
  sub->add_option("--epsilon", o.risk.epsilon, "label smoothing mass");
  add_optimizer_options(sub, o.risk.optimizer);
  sub->add_option("--epochs", o.risk.epochs);
  sub->add_option("--batch", o.risk.batch_size);
  sub->add_option("--anneal-factor", o.risk.anneal_factor);
  sub->add_option("--anneal-floor", o.risk.anneal_floor);
  sub->add_flag("--no-anneal", o.risk_no_anneal, "skip the learning-rate annealing tail");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"SimiLe reward, minimum-risk training and evaluation toolkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "random seed for every stochastic step");
  app.add_option("--out", o.out_dir, "output directory");
  app.set_version_flag("--version", kVersion);

  std::map<CLI::App*, std::function<void(const Options&, Session&)>> handlers;
  auto add = [&](const char* name, const char* desc, auto fn) {
    CLI::App* sub = app.add_subcommand(name, desc);
    handlers[sub] = fn;
    return sub;
  };

  auto* learn = add("learn-bpe", "learn a BPE segmentation model", cmd_learn_bpe);
  learn->add_option("--corpus", o.corpus, "UTF-8 corpus, one sentence per line")->required();
  learn->add_option("--vocab-size", o.vocab_size);
  learn->add_option("--marker", o.marker, "end-of-word marker");

  auto* seg = add("segment", "segment sentences with a BPE model", cmd_segment);
  seg->add_option("--bpe", o.bpe)->required();
  seg->add_option("--input", o.input)->required();

  auto* tsim = add("train-sim", "train the SIM embedding table on paraphrase pairs", cmd_train_sim);
  tsim->add_option("--pairs", o.pairs, "paraphrase TSV")->required();
  tsim->add_option("--bpe", o.bpe);
  tsim->add_option("--emb-init", o.emb_init, "initial embedding table");
  tsim->add_option("--dim", o.dim);
  tsim->add_option("--margin", o.sim.margin);
  tsim->add_option("--lr", o.sim.learning_rate);
  tsim->add_option("--minibatch", o.sim.minibatch_size);
  tsim->add_option("--megabatch", o.sim.megabatch_factor, "mini-batches per mega-batch");
  tsim->add_option("--epochs", o.sim.epochs);
  tsim->add_flag("--bidirectional", o.sim.bidirectional);

  auto* score = add("score", "sentence and corpus BLEU / SIM / SimiLe", cmd_score);
  score->add_option("--refs", o.refs)->required();
  score->add_option("--hyps", o.hyps)->required();
  add_scorer_options(score, o, true);
  score->add_flag("--scale-hundred", o.scale_hundred, "report scores x100");

  auto* filt = add("filter-pairs", "similarity / trigram-overlap paraphrase filter", cmd_filter);
  filt->add_option("--pairs", o.pairs)->required();
  add_scorer_options(filt, o, true);
  filt->add_option("--sim-min", o.filter.sim_min);
  filt->add_option("--trigram-max", o.filter.trigram_max);

  auto* mle = add("mle-train", "label-smoothed MLE training of the toy model", cmd_mle_train);
  mle->add_option("--train-src", o.train_src)->required();
  mle->add_option("--train-ref", o.train_ref)->required();
  mle->add_option("--valid-src", o.valid_src);
  mle->add_option("--valid-ref", o.valid_ref);
  mle->add_option("--init", o.init, "start from an existing toy model");
  mle->add_option("--epsilon", o.mle.epsilon);
  add_optimizer_options(mle, o.mle.optimizer);
  mle->add_option("--epochs", o.mle.epochs);
  mle->add_option("--batch", o.mle.batch_size);
  mle->add_flag("--no-anneal", o.mle_no_anneal);

  auto* risk = add("risk-train", "minimum-risk fine-tuning", cmd_risk_train);
  add_risk_options(risk, o);
  risk->add_option("--k", o.risk.k, "n-best size");

  auto* sweep = add("sweep-nbest", "risk training over several n-best sizes", cmd_sweep);
  add_risk_options(sweep, o);
  sweep->add_option("--k", o.sweep_ks, "comma-separated n-best sizes")->delimiter(',');

  auto* dec = add("decode-nbest", "write exact n-best lists from a toy model", cmd_decode_nbest);
  dec->add_option("--model", o.model)->required();
  dec->add_option("--src", o.input, "source sentences")->required();
  dec->add_option("--refs", o.refs, "references to exclude from the lists");
  dec->add_option("--k", o.risk.k, "n-best size");

  auto* hist = add("analyze-hist", "histogram of candidate costs", cmd_hist);
  hist->add_option("--values", o.values, "one cost per line");
  hist->add_option("--nbest", o.nbest);
  hist->add_option("--refs", o.refs);
  add_scorer_options(hist, o, false);
  hist->add_option("--cost", o.cost);
  hist->add_option("--bin-width", o.bin_width);

  auto* pairs = add("analyze-pairs", "pairwise score differences within n-best lists", cmd_pairs);
  pairs->add_option("--nbest", o.nbest)->required();
  pairs->add_option("--refs", o.refs)->required();
  add_scorer_options(pairs, o, false);
  pairs->add_option("--metrics", o.pair_metrics, "bleu,sim,simile")->delimiter(',');

  auto* f1 = add("analyze-f1", "frequency / tag bucketed lexical F1", cmd_f1);
  f1->add_option("--refs", o.multi_refs)->required();
  f1->add_option("--hyps", o.multi_hyps)->required();
  f1->add_option("--hyps-b", o.multi_hyps_b, "second system for F1 deltas");
  f1->add_option("--freq-source", o.freq_source, "corpus for word frequencies (default: the references)");
  f1->add_option("--tags", o.tags, "token<TAB>tag file");

  auto* cmp = add("compare-metrics", "sort outputs by |dBLEU| - |dSIM|", cmd_compare);
  cmp->add_option("--refs", o.refs)->required();
  cmp->add_option("--hyps-a", o.hyps_a)->required();
  cmp->add_option("--hyps-b", o.hyps_b)->required();
  add_scorer_options(cmp, o, true);
  cmp->add_option("--extremes", o.extremes, "rows flagged at each end");

  auto* cor = add("correlate", "Pearson / Spearman correlation with human scores", cmd_correlate);
  cor->add_option("--judgments", o.judgments)->required();
  add_scorer_options(cor, o, false);

  auto* boot = add("bootstrap", "paired bootstrap resampling", cmd_bootstrap);
  boot->add_option("--refs", o.refs)->required();
  boot->add_option("--hyps-a", o.hyps_a)->required();
  boot->add_option("--hyps-b", o.hyps_b)->required();
  add_scorer_options(boot, o, false);
  boot->add_option("--metric", o.metric, "bleu|sim|simile");
  boot->add_option("--samples", o.samples);

  auto* synth = add("make-synthetic", "write the bundled synthetic task files", cmd_synthetic);
  synth->add_option("--train-size", o.synthetic.train_size);
  synth->add_option("--valid-size", o.synthetic.valid_size);
  synth->add_option("--dim", o.synthetic.dim);
  synth->add_option("--paraphrase-pairs", o.paraphrase_pairs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kUsage);
  }

  try {
    for (auto& [sub, fn] : handlers) {
      if (!sub->parsed()) continue;
      Session session(sub->get_name(), o, sub, out);
      fn(o, session);
      session.finish();
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}

}  // namespace simile
