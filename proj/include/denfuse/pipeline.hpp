#pragma once

// Batch pipeline behind the CLI subcommands. Every command is a pure function
// of (config, disk inputs): reruns with the same seed produce byte-identical
// outputs. Commands never mutate their inputs; reports are written to a temp
// file and renamed so failures leave no partial outputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include "denfuse/analysis.hpp"
#include "denfuse/archive.hpp"
#include "denfuse/backbone.hpp"
#include "denfuse/config.hpp"
#include "denfuse/ensemble.hpp"
#include "denfuse/errors.hpp"
#include "denfuse/fusion.hpp"
#include "denfuse/image_io.hpp"
#include "denfuse/synthetic.hpp"

namespace denfuse {

namespace fs = std::filesystem;

inline std::string sigma_label(double sigma) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", sigma);
  return buf;
}

inline std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> list_png_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory '" + dir + "' does not exist");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  if (names.empty()) throw DataError("corpus directory '" + dir + "' contains no .png images");
  std::sort(names.begin(), names.end());
  return names;
}

inline void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, path);
}

inline std::string index_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "img%03zu", i);
  return buf;
}

struct SplitRef {
  std::string name;
  std::string source_dir;
};

inline std::vector<SplitRef> splits(const PipelineConfig& cfg) {
  return {{"train", cfg.train_dir}, {"fusion", cfg.fusion_dir}, {"test", cfg.test_dir}};
}

inline fs::path clean_path(const PipelineConfig& cfg, const std::string& split, std::size_t i) {
  return fs::path(cfg.out_dir) / "prepared" / "clean" / split / (index_name(i) + ".png");
}

inline fs::path noisy_path(const PipelineConfig& cfg, double sigma, const std::string& split,
                           std::size_t i) {
  return fs::path(cfg.out_dir) / "prepared" / ("sigma_" + sigma_label(sigma)) / split /
         (index_name(i) + ".f32");
}

inline fs::path backbone_path(const PipelineConfig& cfg, double sigma) {
  return fs::path(cfg.out_dir) / "models" / ("backbone_sigma" + sigma_label(sigma) + ".dfa");
}

inline fs::path fusion_path(const PipelineConfig& cfg, FusionObjective objective, double sigma) {
  return fs::path(cfg.out_dir) / "models" /
         ("fusion_" + std::string(objective_name(objective)) + "_sigma" + sigma_label(sigma) + ".dfa");
}

inline std::vector<Tensor> load_clean_split(const PipelineConfig& cfg, const std::string& split) {
  std::vector<Tensor> images;
  for (std::size_t i = 0;; ++i) {
    const fs::path p = clean_path(cfg, split, i);
    if (!fs::exists(p)) break;
    images.push_back(load_image_png(p.string()));
  }
  if (images.empty()) {
    throw DataError("no prepared images for split '" + split + "' under '" + cfg.out_dir +
                    "'; run the prepare command first");
  }
  return images;
}

inline std::vector<std::pair<Tensor, Tensor>> load_pairs(const PipelineConfig& cfg,
                                                         const std::string& split, double sigma) {
  std::vector<std::pair<Tensor, Tensor>> pairs;
  for (std::size_t i = 0;; ++i) {
    const fs::path cp = clean_path(cfg, split, i);
    const fs::path np = noisy_path(cfg, sigma, split, i);
    if (!fs::exists(cp)) break;
    if (!fs::exists(np)) {
      throw DataError("missing prepared noisy image '" + np.string() + "'; rerun prepare");
    }
    pairs.emplace_back(load_image_f32(np.string()), load_image_png(cp.string()));
  }
  if (pairs.empty()) {
    throw DataError("no prepared pairs for split '" + split + "' at sigma " + sigma_label(sigma));
  }
  return pairs;
}

inline void write_loss_log(const fs::path& path, const TrainLog& log) {
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    csv += std::to_string(e) + "," + format_value(log.epoch_loss[e]) + "\n";
  }
  write_text_atomic(path, csv);
}

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline void cmd_make_corpus(const std::string& dir, int count, int size, std::uint64_t seed) {
  if (count < 1 || size < 1) throw UsageError("make-corpus: count and size must be positive");
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    const Tensor img = synthesize_image(size, size, mix64(seed, static_cast<std::uint64_t>(i)));
    save_image_png((fs::path(dir) / (detail::index_name(static_cast<std::size_t>(i)) + ".png")).string(),
                   img);
  }
}

// Deterministic noisy counterparts per sigma: clean PNGs are normalized into
// the output tree, noisy images are stored unclamped as .f32.
inline void cmd_prepare(const PipelineConfig& cfg) {
  cfg.validate();
  std::string manifest = "split,index,source,sigma,clean,noisy,noise_seed\n";
  for (const detail::SplitRef& split : detail::splits(cfg)) {
    const std::vector<std::string> names = detail::list_png_files(split.source_dir);
    for (std::size_t i = 0; i < names.size(); ++i) {
      const Tensor clean = load_image_png((fs::path(split.source_dir) / names[i]).string());
      const fs::path cp = detail::clean_path(cfg, split.name, i);
      fs::create_directories(cp.parent_path());
      save_image_png(cp.string(), clean);
      for (double sigma : cfg.sigmas) {
        const std::uint64_t noise_seed =
            mix64(cfg.seed, fnv1a64(split.name + "/" + names[i] + "@" + sigma_label(sigma)));
        const Tensor noisy = add_awgn(clean, sigma, noise_seed);
        const fs::path np = detail::noisy_path(cfg, sigma, split.name, i);
        fs::create_directories(np.parent_path());
        save_image_f32(np.string(), noisy);
        manifest += split.name + "," + std::to_string(i) + "," + names[i] + "," + sigma_label(sigma) +
                    "," + cp.string() + "," + np.string() + "," + std::to_string(noise_seed) + "\n";
      }
    }
  }
  detail::write_text_atomic(fs::path(cfg.out_dir) / "prepared" / "manifest.csv", manifest);

  // human-readable mask catalog actually in effect for this run
  std::string catalog = "index,manipulation,low_frac,high_frac\n";
  for (std::size_t i = 0; i < cfg.bands.size(); ++i) {
    const int branch = kSpatialCount + 1 + static_cast<int>(i);
    catalog += std::to_string(branch) + "," +
               manipulation_name(manipulation_from_index(branch)) + "," +
               format_value(cfg.bands[i].low_frac) + "," + format_value(cfg.bands[i].high_frac) + "\n";
  }
  detail::write_text_atomic(fs::path(cfg.out_dir) / "prepared" / "masks.csv", catalog);
}

inline void cmd_train_backbone(const PipelineConfig& cfg) {
  cfg.validate();
  const std::vector<Tensor> images = detail::load_clean_split(cfg, "train");
  const std::vector<Tensor> patches = extract_patches(images, cfg.patch_size, cfg.patch_stride);
  if (patches.empty()) {
    throw DataError("patch size " + std::to_string(cfg.patch_size) + " exceeds the training images");
  }
  for (double sigma : cfg.sigmas) {
    TrainLog log;
    const Archive archive =
        train_backbone(patches, sigma, cfg.backbone_epochs,
                       mix64(cfg.seed, fnv1a64("backbone@" + sigma_label(sigma))), &log);
    const fs::path mp = detail::backbone_path(cfg, sigma);
    fs::create_directories(mp.parent_path());
    archive.save(mp.string());
    detail::write_loss_log(fs::path(cfg.out_dir) / "logs" / ("backbone_sigma" + sigma_label(sigma) + ".csv"),
                           log);
  }
}

// Trains the dual model plus the two single-path ablation models per sigma,
// all against the same frozen backbone and the same precomputed stacks.
inline void cmd_train_fusion(const PipelineConfig& cfg) {
  cfg.validate();
  for (double sigma : cfg.sigmas) {
    const fs::path bp = detail::backbone_path(cfg, sigma);
    if (!fs::exists(bp)) {
      throw DataError("missing backbone archive '" + bp.string() + "'; run train-backbone first");
    }
    const std::vector<std::uint8_t> backbone_bytes_before = detail::read_file_bytes(bp);
    const ResidualDenoiser denoiser = ResidualDenoiser::from_archive(Archive::load(bp.string()));

    const std::vector<std::pair<Tensor, Tensor>> pairs = detail::load_pairs(cfg, "fusion", sigma);
    std::vector<EnsembleStack> stacks;
    std::vector<Tensor> cleans;
    stacks.reserve(pairs.size());
    for (const auto& [noisy, clean] : pairs) {
      stacks.push_back(build_stack(noisy, denoiser, cfg.bands, sigma));
      cleans.push_back(clean);
    }

    const auto train_one = [&](FusionObjective objective) {
      TrainLog log;
      const std::uint64_t seed = mix64(
          cfg.seed, fnv1a64(std::string("fusion-") + objective_name(objective) + "@" + sigma_label(sigma)));
      FusionNetwork net = train_fusion_on_stacks(stacks, cleans, cfg.fusion_epochs, seed, &log, objective);
      return std::make_pair(net.to_archive(), log);
    };

    // independent trainings; run the ablations alongside the dual model
    auto spatial_future = std::async(std::launch::async, train_one, FusionObjective::SpatialOnly);
    auto channel_future = std::async(std::launch::async, train_one, FusionObjective::ChannelOnly);
    auto [dual_archive, dual_log] = train_one(FusionObjective::Dual);
    auto [spatial_archive, spatial_log] = spatial_future.get();
    auto [channel_archive, channel_log] = channel_future.get();

    const auto save_one = [&](FusionObjective objective, const Archive& archive, const TrainLog& log) {
      const fs::path mp = detail::fusion_path(cfg, objective, sigma);
      fs::create_directories(mp.parent_path());
      archive.save(mp.string());
      detail::write_loss_log(fs::path(cfg.out_dir) / "logs" /
                                 ("fusion_" + std::string(objective_name(objective)) + "_sigma" +
                                  sigma_label(sigma) + ".csv"),
                             log);
    };
    save_one(FusionObjective::Dual, dual_archive, dual_log);
    save_one(FusionObjective::SpatialOnly, spatial_archive, spatial_log);
    save_one(FusionObjective::ChannelOnly, channel_archive, channel_log);

    if (detail::read_file_bytes(bp) != backbone_bytes_before) {
      throw std::logic_error("frozen-backbone contract violated: '" + bp.string() + "' changed");
    }
  }
}

inline std::vector<EvaluationColumn> run_evaluation(const PipelineConfig& cfg) {
  cfg.validate();
  for (double sigma : cfg.sigmas) {
    for (const fs::path& p :
         {detail::backbone_path(cfg, sigma), detail::fusion_path(cfg, FusionObjective::Dual, sigma),
          detail::fusion_path(cfg, FusionObjective::SpatialOnly, sigma),
          detail::fusion_path(cfg, FusionObjective::ChannelOnly, sigma)}) {
      if (!fs::exists(p)) throw DataError("missing model archive '" + p.string() + "'");
    }
  }
  std::vector<EvaluationColumn> columns;
  for (double sigma : cfg.sigmas) {
    const ResidualDenoiser denoiser =
        ResidualDenoiser::from_archive(Archive::load(detail::backbone_path(cfg, sigma).string()));
    const FusionNetwork dual_net = FusionNetwork::from_archive(
        Archive::load(detail::fusion_path(cfg, FusionObjective::Dual, sigma).string()));
    const FusionNetwork spatial_net = FusionNetwork::from_archive(
        Archive::load(detail::fusion_path(cfg, FusionObjective::SpatialOnly, sigma).string()));
    const FusionNetwork channel_net = FusionNetwork::from_archive(
        Archive::load(detail::fusion_path(cfg, FusionObjective::ChannelOnly, sigma).string()));
    const std::vector<std::pair<Tensor, Tensor>> pairs = detail::load_pairs(cfg, "test", sigma);
    columns.push_back(evaluation_report(pairs, denoiser, dual_net, spatial_net, channel_net, cfg.bands, sigma));
  }
  return columns;
}

inline std::string evaluation_csv(const std::vector<EvaluationColumn>& columns) {
  std::string csv = "method";
  for (const EvaluationColumn& c : columns) csv += ",sigma_" + sigma_label(c.sigma);
  csv += "\n";
  const auto row = [&columns, &csv](const std::string& name, auto getter) {
    csv += name;
    for (const EvaluationColumn& c : columns) csv += "," + format_value(getter(c));
    csv += "\n";
  };
  row("baseline", [](const EvaluationColumn& c) { return c.baseline; });
  constexpr std::array<BranchSubset, 3> kSubsets = {BranchSubset::Sm, BranchSubset::Fm,
                                                    BranchSubset::Joint};
  for (BranchSubset s : kSubsets) {
    row(std::string("ensemble_") + subset_name(s),
        [s](const EvaluationColumn& c) { return c.averaging.get(s); });
  }
  for (BranchSubset s : kSubsets) {
    row(std::string("spatial_") + subset_name(s),
        [s](const EvaluationColumn& c) { return c.spatial.get(s); });
  }
  for (BranchSubset s : kSubsets) {
    row(std::string("channel_") + subset_name(s),
        [s](const EvaluationColumn& c) { return c.channel.get(s); });
  }
  for (BranchSubset s : kSubsets) {
    row(std::string("dual_") + subset_name(s), [s](const EvaluationColumn& c) { return c.dual.get(s); });
  }
  return csv;
}

inline void cmd_evaluate(const PipelineConfig& cfg) {
  const std::vector<EvaluationColumn> columns = run_evaluation(cfg);
  detail::write_text_atomic(fs::path(cfg.out_dir) / "reports" / "evaluation.csv",
                            evaluation_csv(columns));
}

// Correlation uses every pixel of every test image; the error-sample CSV
// keeps 50 seeded pixels per image for distribution plots.
inline void cmd_analyze(const PipelineConfig& cfg, int pixels_per_image = 50) {
  cfg.validate();
  for (double sigma : cfg.sigmas) {
    const fs::path bp = detail::backbone_path(cfg, sigma);
    if (!fs::exists(bp)) throw DataError("missing backbone archive '" + bp.string() + "'");
  }
  for (double sigma : cfg.sigmas) {
    const ResidualDenoiser denoiser =
        ResidualDenoiser::from_archive(Archive::load(detail::backbone_path(cfg, sigma).string()));
    const std::vector<std::pair<Tensor, Tensor>> pairs = detail::load_pairs(cfg, "test", sigma);

    std::vector<ErrorSample> pooled;
    std::string errors_csv = "sigma,image,row,col,branch,manipulation,residual\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& [noisy, clean] = pairs[i];
      const EnsembleStack stack = build_stack(noisy, denoiser, cfg.bands, sigma);
      const std::int64_t all = static_cast<std::int64_t>(stack.height()) * stack.width();
      const std::uint64_t sample_seed =
          mix64(cfg.seed, fnv1a64("analyze@" + sigma_label(sigma)) + i);
      const std::vector<ErrorSample> full =
          error_distribution(stack, clean, static_cast<int>(all), sample_seed, static_cast<int>(i));
      pooled.insert(pooled.end(), full.begin(), full.end());
      const std::vector<ErrorSample> plot = error_distribution(
          stack, clean, std::min<int>(pixels_per_image, static_cast<int>(all)), sample_seed,
          static_cast<int>(i));
      for (const ErrorSample& s : plot) {
        for (int b = 0; b < kBranchCount; ++b) {
          errors_csv += sigma_label(sigma) + "," + std::to_string(s.image_id) + "," +
                        std::to_string(s.row) + "," + std::to_string(s.col) + "," + std::to_string(b) +
                        "," + manipulation_name(manipulation_from_index(b)) + "," +
                        format_value(s.residuals[static_cast<std::size_t>(b)]) + "\n";
        }
      }
    }

    const CorrelationMatrix corr = correlation_matrix(pooled);
    std::string corr_csv = "branch";
    for (int j = 0; j < kBranchCount; ++j) corr_csv += "," + std::to_string(j);
    corr_csv += "\n";
    for (int i = 0; i < kBranchCount; ++i) {
      corr_csv += std::to_string(i);
      for (int j = 0; j < kBranchCount; ++j) corr_csv += "," + format_value(corr.at(i, j));
      corr_csv += "\n";
    }

    const fs::path reports = fs::path(cfg.out_dir) / "reports";
    detail::write_text_atomic(reports / ("correlation_sigma" + sigma_label(sigma) + ".csv"), corr_csv);
    detail::write_text_atomic(reports / ("errors_sigma" + sigma_label(sigma) + ".csv"), errors_csv);
  }
}

// Debugging aid: the 13 branches as PNGs plus a manifest.
inline void dump_stack(const EnsembleStack& stack, std::span<const FrequencyBand> bands,
                       const std::string& dir) {
  fs::create_directories(dir);
  std::string manifest = "index,manipulation,low_frac,high_frac,file\n";
  for (int i = 0; i < kBranchCount; ++i) {
    const Manipulation m = manipulation_from_index(i);
    char name[32];
    std::snprintf(name, sizeof(name), "branch%02d.png", i);
    save_image_png((fs::path(dir) / name).string(), stack.branch(i));
    std::string low = "", high = "";
    if (is_frequency(m)) {
      const FrequencyBand& band = bands[static_cast<std::size_t>(i - kSpatialCount - 1)];
      low = format_value(band.low_frac);
      high = format_value(band.high_frac);
    }
    manifest += std::to_string(i) + "," + manipulation_name(m) + "," + low + "," + high + "," + name + "\n";
  }
  detail::write_text_atomic(fs::path(dir) / "manifest.csv", manifest);
}

inline void cmd_denoise_one(const PipelineConfig& cfg, const std::string& input_path, double sigma,
                            const std::string& output_path, const std::string& stack_dump_dir = "") {
  const fs::path bp = detail::backbone_path(cfg, sigma);
  const fs::path fp = detail::fusion_path(cfg, FusionObjective::Dual, sigma);
  if (!fs::exists(bp)) throw DataError("missing backbone archive '" + bp.string() + "'");
  if (!fs::exists(fp)) throw DataError("missing fusion archive '" + fp.string() + "'");
  const ResidualDenoiser denoiser = ResidualDenoiser::from_archive(Archive::load(bp.string()));
  const FusionNetwork net = FusionNetwork::from_archive(Archive::load(fp.string()));

  const Tensor noisy = fs::path(input_path).extension() == ".f32" ? load_image_f32(input_path)
                                                                  : load_image_png(input_path);
  const EnsembleStack stack = build_stack(noisy, denoiser, cfg.bands, sigma);
  if (!stack_dump_dir.empty()) dump_stack(stack, cfg.bands, stack_dump_dir);
  const FusionOutput out = dual_fuse(stack, net);
  save_image_png(output_path, clamp01(out.fused));
}

}  // namespace denfuse
