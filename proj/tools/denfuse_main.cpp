// denfuse command line: prepare -> train-backbone -> train-fusion ->
// evaluate / analyze, plus denoise-one and make-corpus conveniences.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "denfuse/config.hpp"
#include "denfuse/errors.hpp"
#include "denfuse/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sigmas;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "pipeline config file (key = value lines)");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--sigma", flags.sigmas, "override the sigma list, e.g. 10,25,50");
  cmd->add_option("--out", flags.out_dir, "override the output directory");
}

// file values first, flags win
denfuse::PipelineConfig resolve_config(const CommonFlags& flags) {
  denfuse::PipelineConfig cfg;
  if (!flags.config_path.empty()) cfg = denfuse::load_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.sigmas) cfg.sigmas = denfuse::parse_sigma_list(*flags.sigmas);
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-ensemble denoising with dual-attention fusion"};
  app.require_subcommand(1);

  CommonFlags prepare_flags, train_b_flags, train_f_flags, eval_flags, analyze_flags, one_flags;

  CLI::App* prepare = app.add_subcommand("prepare", "synthesize noisy/clean pairs per sigma");
  add_common(prepare, prepare_flags);

  CLI::App* train_backbone = app.add_subcommand("train-backbone", "train one denoiser per sigma");
  add_common(train_backbone, train_b_flags);

  CLI::App* train_fusion =
      app.add_subcommand("train-fusion", "train dual + single-path fusion models per sigma");
  add_common(train_fusion, train_f_flags);

  CLI::App* evaluate = app.add_subcommand("evaluate", "write the method-by-sigma PSNR table");
  add_common(evaluate, eval_flags);

  CLI::App* analyze = app.add_subcommand("analyze", "write correlation and error-sample CSVs");
  add_common(analyze, analyze_flags);

  CLI::App* denoise_one = app.add_subcommand("denoise-one", "denoise a single image with the dual model");
  add_common(denoise_one, one_flags);
  std::string input_path, output_path, stack_dir;
  double one_sigma = 25.0;
  denoise_one->add_option("--input", input_path, "noisy input (.png or .f32)")->required();
  denoise_one->add_option("--output", output_path, "fused output PNG")->required();
  denoise_one->add_option("--noise-sigma", one_sigma, "noise level of the trained models to use");
  denoise_one->add_option("--dump-stack", stack_dir, "also write the 13 branch images here");

  CLI::App* make_corpus = app.add_subcommand("make-corpus", "generate a synthetic grayscale corpus");
  std::string corpus_dir;
  int corpus_count = 20;
  int corpus_size = 64;
  std::uint64_t corpus_seed = 1;
  make_corpus->add_option("--out", corpus_dir, "target directory")->required();
  make_corpus->add_option("--count", corpus_count, "number of images");
  make_corpus->add_option("--size", corpus_size, "square image size in pixels");
  make_corpus->add_option("--seed", corpus_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      denfuse::cmd_prepare(resolve_config(prepare_flags));
    } else if (train_backbone->parsed()) {
      denfuse::cmd_train_backbone(resolve_config(train_b_flags));
    } else if (train_fusion->parsed()) {
      denfuse::cmd_train_fusion(resolve_config(train_f_flags));
    } else if (evaluate->parsed()) {
      denfuse::cmd_evaluate(resolve_config(eval_flags));
    } else if (analyze->parsed()) {
      denfuse::cmd_analyze(resolve_config(analyze_flags));
    } else if (denoise_one->parsed()) {
      denfuse::cmd_denoise_one(resolve_config(one_flags), input_path, one_sigma, output_path, stack_dir);
    } else if (make_corpus->parsed()) {
      denfuse::cmd_make_corpus(corpus_dir, corpus_count, corpus_size, corpus_seed);
    }
  } catch (const denfuse::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const denfuse::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const denfuse::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
