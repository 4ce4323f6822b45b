#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "s2st/manifest.hpp"
#include "s2st/types.hpp"

using namespace s2st::cli;

namespace {

template <class Opts>
void add_common(CLI::App* cmd, Opts& o) {
  cmd->add_option("-c,--config", o.config, "pipeline config (JSON)");
  cmd->add_option("-o,--out", o.out, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive speech-to-speech translation pipeline on synthetic unit corpora"};
  app.set_version_flag("--version", std::string(s2st::kToolVersion));
  app.require_subcommand(1);

  WorldOptions world;
  auto* genWorld = app.add_subcommand("gen-world", "generate the synthetic bilingual world");
  add_common(genWorld, world);

  CorpusOptions corpus;
  auto* genCorpus = app.add_subcommand("gen-corpus", "generate parallel splits and monolingual sources");
  add_common(genCorpus, corpus);
  genCorpus->add_option("-w,--world", corpus.world, "world file")->required();

  SftOptions sft;
  auto* sftCmd = app.add_subcommand("sft", "supervised fine-tuning");
  add_common(sftCmd, sft);
  sftCmd->add_option("-w,--world", sft.world, "world file")->required();
  sftCmd->add_option("-t,--train", sft.train, "parallel training corpus")->required();
  sftCmd->add_option("--variant", sft.variant, "vanilla, tri-task or chain");
  sftCmd->add_option("--epochs", sft.epochs);
  sftCmd->add_option("--lr", sft.learningRate);
  sftCmd->add_option("--seed", sft.seed);

  PrefsOptions prefs;
  auto* prefsCmd = app.add_subcommand("build-prefs", "sample, back-translate and build preference pairs");
  add_common(prefsCmd, prefs);
  prefsCmd->add_option("-w,--world", prefs.world, "world file")->required();
  prefsCmd->add_option("-m,--checkpoint", prefs.checkpoint, "fine-tuned checkpoint")->required();
  prefsCmd->add_option("-s,--sources", prefs.sources, "parallel or monolingual source file")->required();
  prefsCmd->add_option("--metric", prefs.metric, "WER, BLEU, METEOR or MCD");
  prefsCmd->add_option("--delta", prefs.delta, "score margin (default depends on the metric, 0.1 for METEOR)");
  prefsCmd->add_option("--max-pairs", prefs.maxPairs);
  prefsCmd->add_option("--seed", prefs.seed);

  PoOptions po;
  auto* poCmd = app.add_subcommand("po", "preference optimization (DPO or SimPO)");
  add_common(poCmd, po);
  poCmd->add_option("-w,--world", po.world, "world file")->required();
  poCmd->add_option("-m,--checkpoint", po.checkpoint, "fine-tuned checkpoint")->required();
  poCmd->add_option("-p,--pairs", po.pairs, "preference pairs")->required();
  poCmd->add_option("--algorithm", po.algorithm, "DPO or SimPO");
  poCmd->add_option("--epochs", po.epochs);
  poCmd->add_option("--seed", po.seed);

  IterateOptions iter;
  auto* iterCmd = app.add_subcommand("iterate", "alternate preference building and optimization");
  add_common(iterCmd, iter);
  iterCmd->add_option("-w,--world", iter.world, "world file")->required();
  iterCmd->add_option("-m,--checkpoint", iter.checkpoint, "fine-tuned checkpoint")->required();
  iterCmd->add_option("-s,--sources", iter.sources, "source pool")->required();
  iterCmd->add_option("--test", iter.test, "test corpora for per-iteration ASR-BLEU");
  iterCmd->add_option("--iterations", iter.iterations);
  iterCmd->add_option("--samples", iter.samples, "sources offered per iteration");
  iterCmd->add_option("--max-pairs", iter.maxPairs, "pairs per iteration");

  EvalOptions eval;
  auto* evalCmd = app.add_subcommand("eval", "ASR-BLEU, S2T BLEU or the cascaded baseline");
  add_common(evalCmd, eval);
  evalCmd->add_option("-w,--world", eval.world, "world file")->required();
  evalCmd->add_option("-m,--checkpoint", eval.checkpoint, "checkpoint")->required();
  evalCmd->add_option("-t,--test", eval.test, "test corpora")->required();
  evalCmd->add_option("--task", eval.task, "s2st, s2t or cascaded");

  ReportOptions report;
  auto* reportCmd = app.add_subcommand("report", "tabulate evaluation reports and verify manifests");
  reportCmd->add_option("-r,--reports", report.reports, "evaluation reports");
  reportCmd->add_option("--verify", report.manifests, "run manifests to re-hash");
  reportCmd->add_option("-o,--out", report.out, "write the table here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(s2st::ErrorKind::Usage);
  }

  try {
    if (*genWorld) cmd_gen_world(world);
    if (*genCorpus) cmd_gen_corpus(corpus);
    if (*sftCmd) cmd_sft(sft);
    if (*prefsCmd) cmd_build_prefs(prefs);
    if (*poCmd) cmd_po(po);
    if (*iterCmd) cmd_iterate(iter);
    if (*evalCmd) cmd_eval(eval);
    if (*reportCmd && !cmd_report(report)) return static_cast<int>(s2st::ErrorKind::Data);
  } catch (const s2st::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(s2st::ErrorKind::Runtime);
  }
  return 0;
}
