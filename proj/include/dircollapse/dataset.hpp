#ifndef DIRCOLLAPSE_DATASET_HPP
#define DIRCOLLAPSE_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dircollapse {

// Dense row-major n x d matrix of 64-bit floats.
class RowMatrix {
public:
    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const RowMatrix&) const = default;

private:
    std::size_t rows_{0};
    std::size_t cols_{0};
    std::vector<double> data_;
};

struct Labeling {
    std::string name;
    std::uint32_t num_classes{0};
    std::vector<std::uint32_t> labels;

    bool operator==(const Labeling&) const = default;
};

struct EmbeddingDataset {
    RowMatrix embeddings;
    std::vector<Labeling> labelings;
    std::string source;

    std::size_t n() const noexcept { return embeddings.rows(); }
    std::size_t d() const noexcept { return embeddings.cols(); }

    // Throws Errc::usage naming the available labelings when absent.
    const Labeling& labeling(std::string_view name) const;
    bool has_labeling(std::string_view name) const noexcept;
    std::vector<std::string> labeling_names() const;
};

// Row indices of every class of one labeling, in ascending row order.
struct ClassPartition {
    std::vector<std::vector<std::size_t>> rows;

    static ClassPartition of(const Labeling& labeling);
    std::size_t num_classes() const noexcept { return rows.size(); }
};

enum class Severity { error, warning };

struct ValidationIssue {
    Severity severity{Severity::error};
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

struct LabelingSummary {
    std::string name;
    std::vector<std::size_t> class_counts;
    std::size_t min_class_count{0};

    bool operator==(const LabelingSummary&) const = default;
};

struct ValidationReport {
    std::vector<LabelingSummary> labelings;
    std::vector<ValidationIssue> violations;

    // True when no error-severity violations were found; warnings (singleton
    // classes) still allow first-moment operations.
    bool ok() const noexcept;
    bool operator==(const ValidationReport&) const = default;
};

enum class FileFormat { emb1, csv };

struct LoadOptions {
    // Number of trailing CSV columns holding labelings.
    std::size_t csv_label_columns{1};
};

FileFormat parse_format(std::string_view name);

EmbeddingDataset load_embeddings(const std::filesystem::path& path, FileFormat format,
                                 const LoadOptions& options = {});
void write_embeddings(const EmbeddingDataset& ds, const std::filesystem::path& path);
ValidationReport validate_dataset(const EmbeddingDataset& ds);

// In-memory EMB1 codec used by the file functions.
std::vector<std::uint8_t> encode_emb1(const EmbeddingDataset& ds);
EmbeddingDataset decode_emb1(std::span<const std::uint8_t> bytes);

}  // namespace dircollapse

#endif
