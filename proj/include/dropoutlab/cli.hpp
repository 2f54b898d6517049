#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dropoutlab/deepnet.hpp"
#include "dropoutlab/paradigms.hpp"

namespace dropoutlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr std::uint64_t kDefaultSeed = 42;
/// kDefaultSeed unless DROPOUTLAB_SEED holds an integer.
std::uint64_t default_seed();

/// Declarative description of one `run` invocation. Relative paths are
/// resolved against the manifest's directory.
///
///   {
///     "master_seed": 42,
///     "corpus_config": "corpus.json",   // or "corpus_dir": "data/", or neither for the default corpus
///     "paradigms": ["posthoc", "insitu", "baseline2"],
///     "reg_c": 1.0,
///     "output_dir": "out",
///     "holdout": 0.0,
///     "jobs": 1,
///     "growth_plan": {"width_sweep": [2, 3], "depth_sweep": [2], "fixed_width": 2}
///   }
struct RunManifest {
  std::uint64_t master_seed = kDefaultSeed;
  std::optional<std::filesystem::path> corpus_config_path;
  std::optional<std::filesystem::path> corpus_dir;
  std::vector<ParadigmKind> paradigms;
  double reg_c = 1.0;
  std::filesystem::path output_dir;
  double holdout = 0.0;
  int jobs = 1;
  std::optional<GrowthPlan> growth_plan;
  SgdConfig sgd{};
};

/// Throws Error(SpecInvalid) for unknown paradigm names and Error(BadConfig)
/// for everything else that is malformed or missing.
RunManifest load_manifest(const std::filesystem::path& path);

/// Loads every course directory below `dir` (sorted by name).
std::vector<CourseData> load_corpus_dir(const std::filesystem::path& dir);

/// Entry point of the `dropoutlab` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dropoutlab
