#include "dircollapse/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "dircollapse/error.hpp"

namespace dircollapse {

static_assert(std::endian::native == std::endian::little, "EMB1 codec assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + size);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::span<const std::uint8_t> get_bytes(std::size_t size, const char* what) {
        need(size, what);
        auto s = bytes_.subspan(pos_, size);
        pos_ += size;
        return s;
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t size, const char* what) const {
        if (bytes_.size() - pos_ < size)
            throw Error(Errc::format, std::string("malformed EMB1: truncated ") + what);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_{0};
};

void check_finite(const RowMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (!std::isfinite(m(r, c))) {
                std::ostringstream os;
                os << "non-finite entry at (" << r << ", " << c << ")";
                throw Error(Errc::validation, os.str());
            }
}

void require_ok(const EmbeddingDataset& ds) {
    auto report = validate_dataset(ds);
    for (const auto& v : report.violations)
        if (v.severity == Severity::error) throw Error(Errc::validation, v.message);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

EmbeddingDataset load_csv(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::format, "malformed CSV: missing header row");
    const auto header = split_csv_line(line);
    const std::size_t n_labels = options.csv_label_columns;
    if (header.size() <= n_labels)
        throw Error(Errc::format, "malformed CSV: need at least one feature column before the labeling columns");
    const std::size_t d = header.size() - n_labels;

    std::vector<double> values;
    std::vector<std::vector<std::uint32_t>> labels(n_labels);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            std::ostringstream os;
            os << "dimension mismatch on CSV line " << line_no << ": expected " << header.size()
               << " columns, got " << cells.size();
            throw Error(Errc::format, os.str());
        }
        for (std::size_t c = 0; c < d; ++c) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cells[c], &used));
                if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
            } catch (const std::out_of_range&) {
                values.push_back(std::numeric_limits<double>::infinity());
            } catch (const std::invalid_argument&) {
                throw Error(Errc::format, "malformed CSV value '" + cells[c] + "' on line " + std::to_string(line_no));
            }
        }
        for (std::size_t l = 0; l < n_labels; ++l) {
            const auto& cell = cells[d + l];
            long long v = -1;
            try {
                std::size_t used = 0;
                v = std::stoll(cell, &used);
                if (used != cell.size()) v = -1;
            } catch (const std::exception&) {
                v = -1;
            }
            if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
                throw Error(Errc::format, "label out of range: '" + cell + "' on line " + std::to_string(line_no));
            labels[l].push_back(static_cast<std::uint32_t>(v));
        }
    }

    EmbeddingDataset ds;
    const std::size_t n = labels.empty() ? values.size() / d : labels[0].size();
    ds.embeddings = RowMatrix(n, d);
    ds.embeddings.data() = std::move(values);
    for (std::size_t l = 0; l < n_labels; ++l) {
        Labeling lab;
        lab.name = header[d + l];
        lab.labels = std::move(labels[l]);
        std::uint32_t max_label = 0;
        for (auto y : lab.labels) max_label = std::max(max_label, y);
        lab.num_classes = lab.labels.empty() ? 0 : max_label + 1;
        ds.labelings.push_back(std::move(lab));
    }
    ds.source = path.string();
    if (ds.n() == 0) throw Error(Errc::validation, "empty dataset");
    check_finite(ds.embeddings);
    require_ok(ds);
    return ds;
}

}  // namespace

const Labeling& EmbeddingDataset::labeling(std::string_view name) const {
    for (const auto& l : labelings)
        if (l.name == name) return l;
    std::string available;
    for (const auto& l : labelings) available += (available.empty() ? "" : ", ") + l.name;
    throw Error(Errc::usage, "unknown labeling '" + std::string(name) + "' (available: " + available + ")");
}

bool EmbeddingDataset::has_labeling(std::string_view name) const noexcept {
    for (const auto& l : labelings)
        if (l.name == name) return true;
    return false;
}

std::vector<std::string> EmbeddingDataset::labeling_names() const {
    std::vector<std::string> names;
    for (const auto& l : labelings) names.push_back(l.name);
    return names;
}

ClassPartition ClassPartition::of(const Labeling& labeling) {
    ClassPartition p;
    p.rows.resize(labeling.num_classes);
    for (std::size_t r = 0; r < labeling.labels.size(); ++r) {
        const auto y = labeling.labels[r];
        if (y >= labeling.num_classes) throw Error(Errc::validation, "label out of range");
        p.rows[y].push_back(r);
    }
    return p;
}

bool ValidationReport::ok() const noexcept {
    for (const auto& v : violations)
        if (v.severity == Severity::error) return false;
    return true;
}

ValidationReport validate_dataset(const EmbeddingDataset& ds) {
    ValidationReport report;
    auto flag = [&](Severity s, std::string msg) { report.violations.push_back({s, std::move(msg)}); };

    if (ds.n() == 0) flag(Severity::error, "empty dataset");
    if (ds.d() == 0) flag(Severity::error, "zero embedding dimension");
    if (ds.embeddings.data().size() != ds.n() * ds.d()) flag(Severity::error, "embedding buffer size mismatch");
    if (ds.labelings.empty()) flag(Severity::error, "dataset has no labelings");

    for (std::size_t r = 0; r < ds.n(); ++r)
        for (std::size_t c = 0; c < ds.d(); ++c)
            if (!std::isfinite(ds.embeddings(r, c))) {
                std::ostringstream os;
                os << "non-finite entry at (" << r << ", " << c << ")";
                flag(Severity::error, os.str());
            }

    for (const auto& lab : ds.labelings) {
        LabelingSummary summary;
        summary.name = lab.name;
        summary.class_counts.assign(lab.num_classes, 0);
        if (lab.labels.size() != ds.n()) {
            std::ostringstream os;
            os << "labeling '" << lab.name << "' has " << lab.labels.size() << " labels for " << ds.n() << " samples";
            flag(Severity::error, os.str());
        }
        bool out_of_range = false;
        for (auto y : lab.labels) {
            if (y >= lab.num_classes) {
                out_of_range = true;
                continue;
            }
            ++summary.class_counts[y];
        }
        if (out_of_range) flag(Severity::error, "labeling '" + lab.name + "': label out of range");
        summary.min_class_count = summary.class_counts.empty()
            ? 0
            : *std::min_element(summary.class_counts.begin(), summary.class_counts.end());
        for (std::size_t c = 0; c < summary.class_counts.size(); ++c) {
            if (summary.class_counts[c] == 0)
                flag(Severity::error, "labeling '" + lab.name + "': class " + std::to_string(c) + " has no samples");
            else if (summary.class_counts[c] == 1)
                flag(Severity::warning, "labeling '" + lab.name + "': class " + std::to_string(c) +
                                            " has 1 sample: second-moment ops unavailable");
        }
        report.labelings.push_back(std::move(summary));
    }
    return report;
}

std::vector<std::uint8_t> encode_emb1(const EmbeddingDataset& ds) {
    if (ds.n() == 0) throw Error(Errc::validation, "empty dataset");
    require_ok(ds);
    if (ds.n() > std::numeric_limits<std::uint32_t>::max() || ds.d() > std::numeric_limits<std::uint32_t>::max())
        throw Error(Errc::validation, "dataset too large for EMB1");

    ByteWriter w;
    w.put_bytes(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.n()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.d()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.labelings.size()));
    for (const auto& lab : ds.labelings) {
        if (lab.name.size() > std::numeric_limits<std::uint16_t>::max())
            throw Error(Errc::validation, "labeling name too long");
        w.put<std::uint16_t>(static_cast<std::uint16_t>(lab.name.size()));
        w.put_bytes(lab.name.data(), lab.name.size());
        w.put<std::uint32_t>(lab.num_classes);
        for (auto y : lab.labels) w.put<std::uint32_t>(y);
    }
    for (double v : ds.embeddings.data()) w.put<float>(static_cast<float>(v));
    return w.take();
}

EmbeddingDataset decode_emb1(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.get_bytes(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw Error(Errc::format, "malformed EMB1: bad magic");
    if (auto version = r.get<std::uint32_t>("version"); version != kVersion)
        throw Error(Errc::format, "malformed EMB1: unsupported version " + std::to_string(version));
    const auto n = r.get<std::uint32_t>("n");
    const auto d = r.get<std::uint32_t>("d");
    const auto n_labelings = r.get<std::uint32_t>("labeling count");
    if (n == 0) throw Error(Errc::validation, "empty dataset");
    if (d == 0) throw Error(Errc::format, "malformed EMB1: zero dimension");

    EmbeddingDataset ds;
    for (std::uint32_t l = 0; l < n_labelings; ++l) {
        Labeling lab;
        const auto name_len = r.get<std::uint16_t>("labeling name length");
        auto name = r.get_bytes(name_len, "labeling name");
        lab.name.assign(name.begin(), name.end());
        lab.num_classes = r.get<std::uint32_t>("class count");
        if (r.remaining() / sizeof(std::uint32_t) < n) throw Error(Errc::format, "malformed EMB1: truncated labels");
        lab.labels.resize(n);
        for (auto& y : lab.labels) {
            y = r.get<std::uint32_t>("label");
            if (y >= lab.num_classes)
                throw Error(Errc::format, "label out of range: " + std::to_string(y) + " with K=" +
                                              std::to_string(lab.num_classes) + " in labeling '" + lab.name + "'");
        }
        ds.labelings.push_back(std::move(lab));
    }

    const std::size_t count = static_cast<std::size_t>(n) * d;
    if (r.remaining() != count * sizeof(float))
        throw Error(Errc::format, "dimension mismatch: payload holds " + std::to_string(r.remaining()) +
                                      " bytes, expected " + std::to_string(count * sizeof(float)));
    ds.embeddings = RowMatrix(n, d);
    auto payload = r.get_bytes(count * sizeof(float), "embeddings");
    auto& data = ds.embeddings.data();
    for (std::size_t k = 0; k < count; ++k) {
        float f;
        std::memcpy(&f, payload.data() + k * sizeof(float), sizeof(float));
        data[k] = static_cast<double>(f);
    }
    check_finite(ds.embeddings);
    require_ok(ds);
    return ds;
}

FileFormat parse_format(std::string_view name) {
    if (name == "emb1") return FileFormat::emb1;
    if (name == "csv") return FileFormat::csv;
    throw Error(Errc::usage, "unknown format '" + std::string(name) + "' (expected emb1 or csv)");
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path, FileFormat format, const LoadOptions& options) {
    if (format == FileFormat::csv) return load_csv(path, options);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto ds = decode_emb1(bytes);
    ds.source = path.string();
    return ds;
}

void write_embeddings(const EmbeddingDataset& ds, const std::filesystem::path& path) {
    const auto bytes = encode_emb1(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

}  // namespace dircollapse
