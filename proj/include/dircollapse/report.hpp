#ifndef DIRCOLLAPSE_REPORT_HPP
#define DIRCOLLAPSE_REPORT_HPP

// Subcommand implementations behind the CLI. Each returns a JSON document
// {schema_version, manifest, payload} plus a plot-ready CSV table.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dircollapse/dataset.hpp"
#include "dircollapse/multitask.hpp"
#include "dircollapse/synthetic.hpp"

namespace dircollapse {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1.0";

struct RunManifest {
    std::string subcommand;
    nlohmann::json parameters = nlohmann::json::object();
    std::optional<std::uint64_t> seed;
    nlohmann::json input_digests = nlohmann::json::object();
    std::string tool_version{kToolVersion};
    std::string timestamp;

    nlohmann::json to_json() const;
};

struct CommandOutput {
    RunManifest manifest;
    nlohmann::json payload;
    std::string csv;
    std::vector<std::string> warnings;

    nlohmann::json document() const;
};

// Where a command reads its data from.
struct SourceArgs {
    std::optional<std::filesystem::path> input;
    FileFormat format{FileFormat::emb1};
    std::size_t csv_label_columns{1};
    std::optional<std::filesystem::path> spec;
};

struct StatsArgs {
    SourceArgs source;
    std::string labeling{"class"};
    std::vector<std::uint32_t> classes;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> pair;
};

struct CertifyArgs {
    SourceArgs source;
    std::string labeling{"class"};
    std::vector<std::uint32_t> classes;
    std::vector<std::uint64_t> m_values;
    std::vector<std::string> variants{"optimized"};
    double weight_t{1.0}, weight_s{1.0}, weight_q{1.0};
};

struct FewshotArgs {
    SourceArgs source;
    std::string labeling{"class"};
    std::vector<std::uint32_t> classes;
    std::vector<std::uint64_t> m_values;
    std::size_t trials{1000};
    std::optional<std::uint64_t> seed;
    double test_fraction{0.2};
    std::size_t test_per_class{10000};
};

struct SynthArgs {
    std::filesystem::path spec;
    std::size_t n{0};
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
};

struct OrthoArgs {
    SourceArgs source;
    std::string labeling_a;
    std::string labeling_b;
    VerifyOptions options;
};

struct DecomposeArgs {
    SourceArgs source;
    std::string labeling{"class"};
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    std::size_t random_pairs{0};
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> k_values{1};
};

// Synthetic spec documents ({"model": "gaussian_pair" | "two_point" | "factor", ...}).
struct SyntheticSpec {
    std::string model;
    std::optional<GaussianPairSpec> gaussian;
    std::optional<FactorModelSpec> factor;
    std::size_t two_point_dim{1};
    double two_point_gap{0.0};
    double two_point_sigma2{0.0};

    std::unique_ptr<ClassSampler> sampler() const;
};

SyntheticSpec parse_synthetic_spec(const nlohmann::json& doc);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

CommandOutput cmd_stats(const StatsArgs& args);
CommandOutput cmd_certify(const CertifyArgs& args);
CommandOutput cmd_fewshot(const FewshotArgs& args);
CommandOutput cmd_synth(const SynthArgs& args);
CommandOutput cmd_ortho(const OrthoArgs& args);
CommandOutput cmd_decompose(const DecomposeArgs& args);

std::string sha256_file(const std::filesystem::path& path);
// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace dircollapse

#endif
