#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gpmal/error.hpp"
#include "gpmal/matrix.hpp"

namespace gpmal {

struct LabelSpec {
    enum class Kind { None, LastColumn, Named };
    Kind kind = Kind::LastColumn;
    std::string name;

    static LabelSpec none() { return {Kind::None, {}}; }
    static LabelSpec last_column() { return {Kind::LastColumn, {}}; }
    static LabelSpec named(std::string column) { return {Kind::Named, std::move(column)}; }

    /// "none", "last", or a column name.
    static LabelSpec parse(std::string_view text) {
        if (text == "none") return none();
        if (text == "last") return last_column();
        return named(std::string(text));
    }
};

/// Class labels mapped to dense ids; `classes[id]` is the original token.
/// Ids follow the lexicographic order of the tokens.
struct Labels {
    std::vector<int> ids;
    std::vector<std::string> classes;

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t num_classes() const noexcept { return classes.size(); }

    static Labels from_tokens(const std::vector<std::string>& tokens) {
        std::map<std::string, int> index;
        for (const auto& t : tokens) index.emplace(t, 0);
        Labels out;
        int next = 0;
        for (auto& [token, id] : index) {
            id = next++;
            out.classes.push_back(token);
        }
        out.ids.reserve(tokens.size());
        for (const auto& t : tokens) out.ids.push_back(index.at(t));
        return out;
    }
};

/// Unlabelled feature table. This is all the optimizer ever sees.
class Dataset {
public:
    Dataset(Matrix features, std::vector<std::string> feature_names, bool scaled = false)
        : features_(std::move(features)), names_(std::move(feature_names)), scaled_(scaled) {
        if (features_.rows() < 2)
            throw DataError(DataErrorKind::TooFewInstances, "dataset needs at least 2 instances");
        if (features_.cols() < 1) throw DataError(DataErrorKind::Empty, "dataset needs at least 1 feature");
        if (names_.size() != features_.cols()) throw Error("feature name count does not match column count");
    }

    const Matrix& features() const noexcept { return features_; }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    std::size_t num_instances() const noexcept { return features_.rows(); }
    std::size_t num_features() const noexcept { return features_.cols(); }
    bool scaled() const noexcept { return scaled_; }

private:
    Matrix features_;
    std::vector<std::string> names_;
    bool scaled_;
};

/// Features plus held-out labels. Only evaluation code takes this type.
struct LabeledDataset {
    Dataset data;
    std::optional<Labels> labels;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline bool is_missing(std::string_view cell) {
    return cell.empty() || cell == "?" || cell == "NA" || cell == "NaN" || cell == "nan";
}

}  // namespace detail

/// Parses comma-separated text with a header row. Features are returned unscaled.
inline LabeledDataset read_dataset(std::istream& in, const LabelSpec& spec, std::string_view source = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::trim(line).empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw DataError(DataErrorKind::Empty, std::string(source) + ": no header row");
    if (line.size() >= 3 && std::memcmp(line.data(), "\xEF\xBB\xBF", 3) == 0) line.erase(0, 3);

    std::vector<std::string> header;
    for (auto cell : detail::split_csv(line)) header.emplace_back(cell);
    const std::size_t width = header.size();

    std::optional<std::size_t> label_col;
    switch (spec.kind) {
        case LabelSpec::Kind::None: break;
        case LabelSpec::Kind::LastColumn: label_col = width - 1; break;
        case LabelSpec::Kind::Named: {
            auto it = std::find(header.begin(), header.end(), spec.name);
            if (it == header.end())
                throw DataError(DataErrorKind::MissingLabelColumn,
                                std::string(source) + ": label column '" + spec.name + "' not in header", 1);
            label_col = static_cast<std::size_t>(it - header.begin());
        }
    }

    std::vector<std::string> names;
    for (std::size_t c = 0; c < width; ++c)
        if (c != label_col) names.push_back(header[c]);
    if (names.empty()) throw DataError(DataErrorKind::Empty, std::string(source) + ": no feature columns", 1);

    std::vector<double> values;
    std::vector<std::string> label_tokens;
    std::size_t rows = 0;
    while (next_line()) {
        const auto cells = detail::split_csv(line);
        if (cells.size() != width)
            throw DataError(DataErrorKind::RaggedRow,
                            std::string(source) + ": line " + std::to_string(line_no) + " has " +
                                std::to_string(cells.size()) + " fields, expected " + std::to_string(width),
                            line_no);
        for (std::size_t c = 0; c < width; ++c) {
            const auto cell = cells[c];
            const auto where = std::string(source) + ": line " + std::to_string(line_no) + ", column " +
                               std::to_string(c + 1) + " ('" + header[c] + "')";
            if (c == label_col) {
                if (detail::is_missing(cell))
                    throw DataError(DataErrorKind::MissingValue, where + ": missing label", line_no, c + 1);
                label_tokens.emplace_back(cell);
                continue;
            }
            if (detail::is_missing(cell))
                throw DataError(DataErrorKind::MissingValue, where + ": missing value", line_no, c + 1);
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (*first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last)
                throw DataError(DataErrorKind::NonNumeric, where + ": non-numeric cell '" + std::string(cell) + "'",
                                line_no, c + 1);
            values.push_back(v);
        }
        ++rows;
    }
    if (rows < 2)
        throw DataError(DataErrorKind::TooFewInstances, std::string(source) + ": need at least 2 data rows");

    Matrix features(rows, names.size(), std::move(values));
    LabeledDataset out{Dataset(std::move(features), std::move(names)), std::nullopt};
    if (label_col) out.labels = Labels::from_tokens(label_tokens);
    return out;
}

inline LabeledDataset load_dataset(const std::string& path, const LabelSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::Unreadable, "cannot open dataset file '" + path + "'");
    return read_dataset(in, spec, path);
}

/// Per-column min-max scaling to [0,1]; constant columns become all zeros.
inline Dataset scale_features(const Dataset& d) {
    if (d.scaled()) throw DataError(DataErrorKind::AlreadyScaled, "dataset is already scaled");
    const Matrix& x = d.features();
    Matrix out(x.rows(), x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double lo = x(0, c), hi = x(0, c);
        for (std::size_t r = 1; r < x.rows(); ++r) {
            lo = std::min(lo, x(r, c));
            hi = std::max(hi, x(r, c));
        }
        const double range = hi - lo;
        for (std::size_t r = 0; r < x.rows(); ++r)
            out(r, c) = range > 0.0 ? std::clamp((x(r, c) - lo) / range, 0.0, 1.0) : 0.0;
    }
    return Dataset(std::move(out), d.feature_names(), true);
}

inline LabeledDataset scale_features(const LabeledDataset& d) { return {scale_features(d.data), d.labels}; }

/// Content hash of the feature values (bit patterns) and shape.
inline std::uint64_t dataset_hash(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::uint64_t shape[2] = {d.num_instances(), d.num_features()};
    mix(shape, sizeof shape);
    const auto data = d.features().data();
    mix(data.data(), data.size() * sizeof(double));
    return h;
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    if (!header.empty()) out << '\n';
    out << std::setprecision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

}  // namespace gpmal
