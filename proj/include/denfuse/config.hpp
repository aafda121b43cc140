#pragma once

// Pipeline configuration: a plain "key = value" file plus flag overrides
// (flags win). Lists are comma separated; bands are "low:high" pairs.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "denfuse/errors.hpp"
#include "denfuse/transforms.hpp"

namespace denfuse {

struct PipelineConfig {
  std::string train_dir;   // backbone training corpus (clean PNGs)
  std::string fusion_dir;  // fusion training corpus
  std::string test_dir;    // held-out test corpus
  std::string out_dir = "out";
  std::vector<double> sigmas = {10, 20, 30, 40, 50};
  int backbone_epochs = 40;
  int fusion_epochs = 100;
  std::uint64_t seed = 1;
  int patch_size = 40;
  int patch_stride = 20;
  std::vector<FrequencyBand> bands = default_band_list();

  void validate() const {
    if (train_dir.empty() || fusion_dir.empty() || test_dir.empty()) {
      throw UsageError("config: train_dir, fusion_dir and test_dir are all required");
    }
    const auto canon = [](const std::string& p) {
      return std::filesystem::weakly_canonical(std::filesystem::path(p)).string();
    };
    const std::string a = canon(train_dir), b = canon(fusion_dir), c = canon(test_dir);
    if (a == b || a == c || b == c) {
      throw UsageError("config: train, fusion and test corpora must be disjoint directories");
    }
    if (sigmas.empty()) throw UsageError("config: at least one sigma is required");
    for (double s : sigmas) {
      if (!(s >= 0.0)) throw UsageError("config: sigmas must be non-negative");
    }
    if (backbone_epochs < 0 || fusion_epochs < 0) throw UsageError("config: epochs must be >= 0");
    if (patch_size < 1 || patch_stride < 1) throw UsageError("config: patch size/stride must be positive");
    if (bands.size() != kFrequencyCount) {
      throw UsageError("config: exactly " + std::to_string(kFrequencyCount) + " bands are required");
    }
    for (const FrequencyBand& band : bands) {
      if (!(band.low_frac >= 0.0 && band.high_frac <= 1.0 && band.low_frac <= band.high_frac)) {
        throw UsageError("config: bands must satisfy 0 <= low <= high <= 1");
      }
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, sep)) out.push_back(trim(item));
  return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: bad numeric value '" + s + "' for key '" + key + "'");
  }
}

inline std::int64_t parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: bad integer value '" + s + "' for key '" + key + "'");
  }
}

}  // namespace detail

inline std::vector<double> parse_sigma_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : detail::split(text, ',')) {
    if (!item.empty()) out.push_back(detail::parse_double(item, "sigmas"));
  }
  return out;
}

inline std::vector<FrequencyBand> parse_band_list(const std::string& text) {
  std::vector<FrequencyBand> out;
  for (const std::string& item : detail::split(text, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw UsageError("config: band '" + item + "' must be low:high");
    }
    out.push_back({detail::parse_double(detail::trim(item.substr(0, colon)), "bands"),
                   detail::parse_double(detail::trim(item.substr(colon + 1)), "bands")});
  }
  return out;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  PipelineConfig cfg;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key == "train_dir") {
      cfg.train_dir = value;
    } else if (key == "fusion_dir") {
      cfg.fusion_dir = value;
    } else if (key == "test_dir") {
      cfg.test_dir = value;
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "sigmas") {
      cfg.sigmas = parse_sigma_list(value);
    } else if (key == "backbone_epochs") {
      cfg.backbone_epochs = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "fusion_epochs") {
      cfg.fusion_epochs = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
    } else if (key == "patch_size") {
      cfg.patch_size = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "patch_stride") {
      cfg.patch_stride = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "bands") {
      cfg.bands = parse_band_list(value);
    } else {
      throw UsageError("config line " + std::to_string(line_number) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

}  // namespace denfuse
