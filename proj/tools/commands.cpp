#include "commands.hpp"

#include <cstdio>
#include <iostream>

#include "config.hpp"
#include "s2st/checkpoint.hpp"
#include "s2st/eval.hpp"
#include "s2st/io.hpp"
#include "s2st/manifest.hpp"
#include "s2st/po.hpp"
#include "s2st/prefdata.hpp"
#include "s2st/sft.hpp"
#include "s2st/world.hpp"

namespace s2st::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string require_file(const Path& p, const char* what) {
  if (!fs::exists(p)) fail_data(std::string(what) + " not found: " + p.string());
  return read_file(p);
}

SyntheticWorld load_world(const Path& p) { return parse_world(require_file(p, "world file")); }

ModelCheckpoint load_model(const Path& p, const SyntheticWorld& world) {
  require_file(p, "checkpoint");
  auto ckpt = load_checkpoint(p);
  if (vocabulary_hash(ckpt.vocab) != vocabulary_hash(world_vocabulary(world)))
    fail_data("checkpoint " + p.string() + " was not built for this world's vocabulary");
  return ckpt;
}

PromptFormatter formatter_for(const SyntheticWorld& world) {
  return PromptFormatter(world_vocabulary(world), SpeechFrontend::from_world(world));
}

std::vector<ParallelSample> load_parallel(const std::vector<Path>& files) {
  std::vector<ParallelSample> out;
  for (const auto& f : files) {
    auto part = parse_parallel(require_file(f, "corpus file"));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void finish_manifest(RunManifest& m, const Stopwatch& clock, const Path& path) {
  m.durationSeconds = clock.seconds();
  write_manifest(m, path);
  std::cout << "wrote " << path.string() << "\n";
}

}  // namespace

void cmd_gen_world(const WorldOptions& o) {
  Stopwatch clock;
  const auto cfg = load_config(o.config);
  const auto world = generate_world(cfg.worldSeed, cfg.world);
  const auto worldPath = o.out / "world.json";
  write_file(worldPath, serialize_world(world));

  RunManifest m;
  m.stage = "gen-world";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.outputs.push_back(artifact("world", worldPath));
  m.config = config_json(cfg).at("world");
  m.seeds["world"] = cfg.worldSeed;
  finish_manifest(m, clock, o.out / "gen-world.manifest.json");
}

void cmd_gen_corpus(const CorpusOptions& o) {
  Stopwatch clock;
  const auto cfg = load_config(o.config);
  const auto world = load_world(o.world);

  const auto a = generate_splits(world, Direction::A2B, cfg.corpus.sizes, cfg.corpus.seed);
  const auto b = generate_splits(world, Direction::B2A, cfg.corpus.sizes, cfg.corpus.seed);
  auto join = [](std::vector<ParallelSample> x, const std::vector<ParallelSample>& y) {
    x.insert(x.end(), y.begin(), y.end());
    return x;
  };
  const std::vector<std::pair<std::string, std::string>> files = {
      {"train.jsonl", serialize_parallel(join(a.train, b.train))},
      {"dev.jsonl", serialize_parallel(join(a.dev, b.dev))},
      {"test.A2B.jsonl", serialize_parallel(a.test)},
      {"test.B2A.jsonl", serialize_parallel(b.test)},
      {"mono.A.jsonl",
       serialize_utterances(generate_monolingual_corpus(world, Language::A, cfg.corpus.monolingual, cfg.corpus.seed))},
      {"mono.B.jsonl",
       serialize_utterances(generate_monolingual_corpus(world, Language::B, cfg.corpus.monolingual, cfg.corpus.seed))},
  };

  RunManifest m;
  m.stage = "gen-corpus";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.inputs.push_back(artifact("world", o.world));
  for (const auto& [name, body] : files) {
    write_file(o.out / name, body);
    m.outputs.push_back(artifact(name, o.out / name));
  }
  m.config = config_json(cfg).at("corpus");
  m.seeds["corpus"] = cfg.corpus.seed;
  finish_manifest(m, clock, o.out / "gen-corpus.manifest.json");
}

void cmd_sft(const SftOptions& o) {
  Stopwatch clock;
  auto cfg = load_config(o.config);
  if (o.variant) cfg.variant = parse_variant(*o.variant);
  if (o.epochs) cfg.sft.epochs = *o.epochs;
  if (o.learningRate) cfg.sft.learningRate = *o.learningRate;
  if (o.seed) cfg.sft.seed = *o.seed;

  const auto world = load_world(o.world);
  const auto formatter = formatter_for(world);
  const auto corpus = parse_parallel(require_file(o.train, "training corpus"));
  const auto dataset = build_sft_dataset(formatter, corpus, cfg.variant);
  const auto start = init_checkpoint(cfg.model, formatter.vocab(), cfg.variant);

  cfg.sft.onEpoch = [](int epoch, double loss, const ModelCheckpoint&) {
    std::fprintf(stderr, "epoch %d  loss %.5f\n", epoch + 1, loss);
  };
  const auto result = run_sft(start, dataset, cfg.sft);

  const auto ckptPath = o.out / "model.ckpt";
  const auto lossPath = o.out / "loss.json";
  save_checkpoint(result.checkpoint, ckptPath);
  write_file(lossPath, json({{"epoch_losses", result.epochLosses}}).dump(2) + "\n");

  RunManifest m;
  m.stage = "sft";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.inputs.push_back(artifact("world", o.world));
  m.inputs.push_back(artifact("train", o.train));
  m.outputs.push_back(artifact("checkpoint", ckptPath));
  m.outputs.push_back(artifact("loss", lossPath));
  const auto full = config_json(cfg);
  m.config = {{"model", full.at("model")}, {"sft", full.at("sft")}};
  m.seeds = {{"model", cfg.model.seed}, {"sft", cfg.sft.seed}};
  m.results = {{"epoch_losses", result.epochLosses}, {"examples", dataset.size()}};
  finish_manifest(m, clock, o.out / "sft.manifest.json");
}

void cmd_build_prefs(const PrefsOptions& o) {
  Stopwatch clock;
  auto cfg = load_config(o.config);
  if (o.metric) cfg.prefs.metric = parse_metric(*o.metric);
  if (o.delta) cfg.prefs.delta = *o.delta;
  if (o.maxPairs) cfg.prefs.maxPairs = *o.maxPairs;
  if (o.seed) cfg.prefs.seed = *o.seed;

  const auto world = load_world(o.world);
  const auto ckpt = load_model(o.checkpoint, world);
  const auto sources = parse_utterances(require_file(o.sources, "source file"));
  const auto ds = build_preference_pairs(ckpt, formatter_for(world), world, sources, cfg.prefs);

  const auto pairsPath = o.out / "pairs.jsonl";
  const auto provPath = o.out / "pairs.provenance.json";
  write_file(pairsPath, serialize_pairs(ds.pairs));
  write_file(provPath, serialize_provenance(ds.provenance, ds.skipped));

  std::string skips;
  for (const auto& [reason, n] : ds.skip_counts()) skips += " " + reason + "=" + std::to_string(n);
  std::cout << "kept " << ds.pairs.size() << " pairs from " << ds.provenance.sourcesConsumed << " sources; skipped:"
            << (skips.empty() ? " none" : skips) << "\n";

  RunManifest m;
  m.stage = "build-prefs";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.inputs.push_back(artifact("world", o.world));
  m.inputs.push_back(artifact("checkpoint", o.checkpoint));
  m.inputs.push_back(artifact("sources", o.sources));
  m.outputs.push_back(artifact("pairs", pairsPath));
  m.outputs.push_back(artifact("provenance", provPath));
  m.config = config_json(cfg).at("prefs");
  m.seeds["prefs"] = cfg.prefs.seed;
  m.results = {{"pairs", ds.pairs.size()}, {"sources_consumed", ds.provenance.sourcesConsumed},
               {"skipped", ds.skip_counts()}};
  finish_manifest(m, clock, o.out / "build-prefs.manifest.json");
}

void cmd_po(const PoOptions& o) {
  Stopwatch clock;
  auto cfg = load_config(o.config);
  if (o.algorithm) cfg.po.algorithm = parse_algorithm(*o.algorithm);
  if (o.epochs) cfg.po.epochs = *o.epochs;
  if (o.seed) cfg.po.seed = *o.seed;

  const auto world = load_world(o.world);
  const auto ckpt = load_model(o.checkpoint, world);
  const auto pairs = parse_pairs(require_file(o.pairs, "preference file"));
  const auto result = run_po(ckpt, pairs, formatter_for(world), cfg.po);
  for (std::size_t e = 0; e < result.epochLosses.size(); ++e)
    std::fprintf(stderr, "epoch %zu  loss %.5f\n", e + 1, result.epochLosses[e]);

  const auto ckptPath = o.out / "model.ckpt";
  save_checkpoint(result.checkpoint, ckptPath);

  RunManifest m;
  m.stage = "po";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.inputs.push_back(artifact("world", o.world));
  m.inputs.push_back(artifact("checkpoint", o.checkpoint));
  m.inputs.push_back(artifact("pairs", o.pairs));
  const auto prov = Path(o.pairs).replace_extension(".provenance.json");
  if (fs::exists(prov)) m.inputs.push_back(artifact("provenance", prov));
  m.outputs.push_back(artifact("checkpoint", ckptPath));
  m.config = config_json(cfg).at("po");
  m.seeds["po"] = cfg.po.seed;
  m.results = {{"algorithm", std::string(to_string(cfg.po.algorithm))},
               {"epoch_losses", result.epochLosses},
               {"pairs", pairs.size()}};
  finish_manifest(m, clock, o.out / "po.manifest.json");
}

void cmd_iterate(const IterateOptions& o) {
  Stopwatch clock;
  auto cfg = load_config(o.config);
  if (o.iterations) cfg.iterate.iterations = *o.iterations;
  if (o.samples) cfg.iterate.samplesPerIteration = *o.samples;
  if (o.maxPairs) cfg.prefs.maxPairs = *o.maxPairs;

  const auto world = load_world(o.world);
  const auto formatter = formatter_for(world);
  const auto ckpt = load_model(o.checkpoint, world);
  const auto sources = parse_utterances(require_file(o.sources, "source file"));
  const auto test = load_parallel(o.test);
  CheckpointEvaluator evaluate;
  if (!test.empty())
    evaluate = [&](const ModelCheckpoint& c) {
      return eval_s2st(c, formatter, world, test, cfg.eval.maxNewTokens).corpusBleu;
    };
  const auto result = run_iterations(ckpt, formatter, world, sources, cfg.prefs, cfg.po, cfg.iterate.iterations,
                                     cfg.iterate.samplesPerIteration, evaluate);

  json reports = json::array();
  for (const auto& r : result.reports) {
    reports.push_back({{"iteration", r.iteration},
                       {"input_hash", r.inputHash},
                       {"output_hash", r.outputHash},
                       {"pairs", r.pairs},
                       {"sources_consumed", r.sourcesConsumed},
                       {"skipped", r.skipCounts},
                       {"epoch_losses", r.epochLosses},
                       {"asr_bleu", r.evaluation ? json(*r.evaluation) : json(nullptr)},
                       {"note", r.note}});
    std::cout << "iteration " << r.iteration << ": " << r.pairs << " pairs";
    if (r.evaluation) std::cout << ", ASR-BLEU " << *r.evaluation;
    if (!r.note.empty()) std::cout << " (" << r.note << ")";
    std::cout << "\n";
  }
  const auto ckptPath = o.out / "model.ckpt";
  const auto iterPath = o.out / "iterations.json";
  save_checkpoint(result.checkpoint, ckptPath);
  write_file(iterPath, reports.dump(2) + "\n");

  RunManifest m;
  m.stage = "iterate";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.inputs.push_back(artifact("world", o.world));
  m.inputs.push_back(artifact("checkpoint", o.checkpoint));
  m.inputs.push_back(artifact("sources", o.sources));
  for (const auto& t : o.test) m.inputs.push_back(artifact("test", t));
  m.outputs.push_back(artifact("checkpoint", ckptPath));
  m.outputs.push_back(artifact("iterations", iterPath));
  const auto full = config_json(cfg);
  m.config = {{"prefs", full.at("prefs")}, {"po", full.at("po")}, {"iterate", full.at("iterate")}};
  m.seeds = {{"prefs", cfg.prefs.seed}, {"po", cfg.po.seed}};
  m.results = {{"iterations", reports}};
  finish_manifest(m, clock, o.out / "iterate.manifest.json");
}

void cmd_eval(const EvalOptions& o) {
  Stopwatch clock;
  const auto cfg = load_config(o.config);
  const auto world = load_world(o.world);
  const auto formatter = formatter_for(world);
  const auto ckpt = load_model(o.checkpoint, world);
  const auto test = load_parallel(o.test);
  if (test.empty()) fail_data("test set is empty");

  EvalReport report;
  if (o.task == "s2st")
    report = eval_s2st(ckpt, formatter, world, test, cfg.eval.maxNewTokens);
  else if (o.task == "s2t")
    report = eval_s2t(ckpt, formatter, test, cfg.eval.maxNewTokens);
  else if (o.task == "cascaded")
    report = cascaded_baseline(ckpt, formatter, world, test, cfg.eval.seed, cfg.eval.maxNewTokens);
  else
    fail_usage("unknown evaluation task '" + o.task + "' (expected s2st, s2t or cascaded)");

  const auto reportPath = o.out / ("report." + o.task + ".json");
  write_file(reportPath, serialize_report(report));
  std::cout << render_table({report});

  RunManifest m;
  m.stage = "eval";
  if (o.config) m.inputs.push_back(artifact("config", *o.config));
  m.inputs.push_back(artifact("world", o.world));
  m.inputs.push_back(artifact("checkpoint", o.checkpoint));
  for (const auto& t : o.test) m.inputs.push_back(artifact("test", t));
  m.outputs.push_back(artifact("report", reportPath));
  m.config = {{"task", o.task}, {"eval", config_json(cfg).at("eval")}};
  m.seeds["eval"] = cfg.eval.seed;
  m.results = {{"corpus_bleu", report.corpusBleu}, {"sentences", report.sentenceCount}};
  finish_manifest(m, clock, o.out / ("eval-" + o.task + ".manifest.json"));
}

bool cmd_report(const ReportOptions& o) {
  std::vector<EvalReport> reports;
  for (const auto& p : o.reports) reports.push_back(parse_report(require_file(p, "report")));
  std::string table = reports.empty() ? std::string() : render_table(reports);
  bool ok = true;
  for (const auto& p : o.manifests) {
    require_file(p, "manifest");
    const auto problems = verify_manifest(p);
    table += (problems.empty() ? "verified " : "FAILED   ") + p.string() + "\n";
    for (const auto& q : problems) table += "  " + q + "\n";
    ok = ok && problems.empty();
  }
  std::cout << table;
  if (o.out) write_file(*o.out, table);
  return ok;
}

}  // namespace s2st::cli
