#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace runlens {

enum class ColumnKind { numeric, categorical };

inline std::string_view to_string(ColumnKind k) { return k == ColumnKind::numeric ? "numeric" : "categorical"; }

/// One feature column. Categorical cells are stored as vocabulary indices; NaN marks a missing cell.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<double> values;
    std::vector<std::string> vocabulary;

    bool categorical() const { return kind == ColumnKind::categorical; }

    std::string cell_string(std::size_t row) const;
};

/// Column-oriented feature table.
class Table {
public:
    Table() = default;
    explicit Table(std::vector<Column> columns) : columns_(std::move(columns)) {
        rows_ = columns_.empty() ? 0 : columns_.front().values.size();
        for (const auto& c : columns_)
            if (c.values.size() != rows_)
                throw Error(ErrorKind::validation, "column '" + c.name + "' has a different row count");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    std::vector<Column>& columns() { return columns_; }
    const Column& column(std::size_t i) const { return columns_[i]; }
    Column& column(std::size_t i) { return columns_[i]; }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i].name == name) return i;
        return std::nullopt;
    }

    const Column& column(const std::string& name) const {
        auto i = find(name);
        if (!i) throw Error(ErrorKind::not_found, "unknown column '" + name + "'");
        return columns_[*i];
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& c : columns_) out.push_back(c.name);
        return out;
    }

    Table select_rows(const std::vector<std::size_t>& rows) const {
        std::vector<Column> out;
        for (const auto& c : columns_) {
            Column nc{c.name, c.kind, {}, c.vocabulary};
            nc.values.reserve(rows.size());
            for (auto r : rows) nc.values.push_back(c.values[r]);
            out.push_back(std::move(nc));
        }
        Table t(std::move(out));
        t.rows_ = rows.size();
        return t;
    }

    /// Keeps the named columns in the given order.
    Table select_columns(const std::vector<std::string>& names) const {
        std::vector<Column> out;
        for (const auto& n : names) out.push_back(column(n));
        Table t(std::move(out));
        if (names.empty()) t.rows_ = rows_;
        return t;
    }

    /// Concatenates the columns of several tables with equal row counts.
    static Table concat(const std::vector<Table>& parts) {
        std::vector<Column> out;
        std::size_t rows = parts.empty() ? 0 : parts.front().rows();
        for (const auto& p : parts) {
            if (p.rows() != rows) throw Error(ErrorKind::contract, "concatenating tables with different row counts");
            for (const auto& c : p.columns()) out.push_back(c);
        }
        Table t(std::move(out));
        t.rows_ = rows;
        return t;
    }

    /// Numeric view: categorical columns contribute their codes, missing stays NaN.
    Matrix to_matrix() const {
        Matrix m(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(columns_.size()));
        for (std::size_t j = 0; j < columns_.size(); ++j)
            for (std::size_t i = 0; i < rows_; ++i)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = columns_[j].values[i];
        return m;
    }

    bool has_missing() const {
        for (const auto& c : columns_)
            for (double v : c.values)
                if (is_missing(v)) return true;
        return false;
    }

private:
    std::vector<Column> columns_;
    std::size_t rows_ = 0;
};

/// Features plus a class target.
struct Dataset {
    Table features;
    std::string target;
    std::vector<int> labels;
    std::vector<std::string> class_labels;
    /// Position of the target column in the source file, for faithful CSV export.
    std::size_t target_position = 0;

    std::size_t rows() const { return features.rows(); }
    std::size_t n_classes() const { return class_labels.size(); }

    Dataset select_rows(const std::vector<std::size_t>& rows) const {
        Dataset d{features.select_rows(rows), target, {}, class_labels, target_position};
        d.labels.reserve(rows.size());
        for (auto r : rows) d.labels.push_back(labels[r]);
        return d;
    }

    void validate() const {
        if (class_labels.size() < 2) throw Error(ErrorKind::validation, "dataset needs at least 2 class labels");
        if (features.find(target)) throw Error(ErrorKind::validation, "target column is also a feature");
        if (labels.size() != features.rows()) throw Error(ErrorKind::validation, "label count != row count");
        for (int l : labels)
            if (l < 0 || static_cast<std::size_t>(l) >= class_labels.size())
                throw Error(ErrorKind::validation, "label outside class_labels");
        for (const auto& c : features.columns())
            if (c.categorical())
                for (double v : c.values)
                    if (!is_missing(v) && (v < 0 || v >= static_cast<double>(c.vocabulary.size())))
                        throw Error(ErrorKind::validation, "categorical value outside vocabulary in '" + c.name + "'");
    }
};

/// Shortest round-trip decimal representation.
inline std::string format_number(double x) {
    if (is_missing(x)) return "";
    if (x == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string Column::cell_string(std::size_t row) const {
    double v = values[row];
    if (is_missing(v)) return "";
    if (categorical()) return vocabulary[static_cast<std::size_t>(v)];
    return format_number(v);
}

namespace csv {

using Row = std::vector<std::optional<std::string>>;

/// RFC-4180 style parser; an empty unquoted cell is missing.
inline std::vector<Row> parse(const std::string& text) {
    std::vector<Row> rows;
    Row row;
    std::string cell;
    bool quoted = false, in_quotes = false, any = false;
    auto end_cell = [&] {
        if (cell.empty() && !quoted) row.emplace_back(std::nullopt);
        else row.emplace_back(cell);
        cell.clear();
        quoted = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            quoted = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_cell();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            cell += c;
        }
    }
    if (in_quotes) throw Error(ErrorKind::load, "unterminated quoted CSV field");
    if (any) {
        end_cell();
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += escape(cells[i]);
    }
    return out;
}

}  // namespace csv

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

struct ColumnDeclaration {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::optional<std::vector<std::string>> vocabulary;
};

/// Builds a Dataset from CSV text. Undeclared columns are numeric when every present cell parses.
inline Dataset dataset_from_csv(const std::string& text, const std::string& target,
                                const std::vector<ColumnDeclaration>& declared = {},
                                const std::optional<std::vector<std::string>>& class_labels = std::nullopt) {
    auto rows = csv::parse(text);
    if (rows.empty()) throw Error(ErrorKind::load, "dataset CSV has no header row");
    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.push_back(h.value_or(""));
    const std::size_t width = header.size();
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != width)
            throw Error(ErrorKind::load, "dataset CSV row " + std::to_string(r) + " has " +
                                             std::to_string(rows[r].size()) + " cells, expected " +
                                             std::to_string(width));
    auto tpos = std::find(header.begin(), header.end(), target);
    if (tpos == header.end()) throw Error(ErrorKind::validation, "target column '" + target + "' not in dataset");

    Dataset ds;
    ds.target = target;
    ds.target_position = static_cast<std::size_t>(tpos - header.begin());
    std::vector<Column> columns;
    for (std::size_t j = 0; j < width; ++j) {
        if (j == ds.target_position) {
            std::vector<std::string> labels = class_labels.value_or(std::vector<std::string>{});
            if (!class_labels) {
                std::set<std::string> uniq;
                for (std::size_t r = 1; r < rows.size(); ++r)
                    if (rows[r][j]) uniq.insert(*rows[r][j]);
                labels.assign(uniq.begin(), uniq.end());
            }
            ds.class_labels = labels;
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (!rows[r][j]) throw Error(ErrorKind::validation, "missing target in row " + std::to_string(r));
                auto it = std::find(labels.begin(), labels.end(), *rows[r][j]);
                if (it == labels.end())
                    throw Error(ErrorKind::validation, "target value '" + *rows[r][j] + "' not in class_labels");
                ds.labels.push_back(static_cast<int>(it - labels.begin()));
            }
            continue;
        }
        const ColumnDeclaration* decl = nullptr;
        for (const auto& d : declared)
            if (d.name == header[j]) decl = &d;
        Column col{header[j], ColumnKind::numeric, {}, {}};
        bool numeric = true;
        if (decl) {
            numeric = decl->kind == ColumnKind::numeric;
        } else {
            for (std::size_t r = 1; r < rows.size() && numeric; ++r)
                if (rows[r][j] && !parse_double(*rows[r][j])) numeric = false;
        }
        if (numeric) {
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (!rows[r][j]) {
                    col.values.push_back(missing_value);
                    continue;
                }
                auto v = parse_double(*rows[r][j]);
                if (!v) throw Error(ErrorKind::validation, "non-numeric cell in numeric column '" + col.name + "'");
                col.values.push_back(*v);
            }
        } else {
            col.kind = ColumnKind::categorical;
            if (decl && decl->vocabulary) {
                col.vocabulary = *decl->vocabulary;
            } else {
                std::set<std::string> uniq;
                for (std::size_t r = 1; r < rows.size(); ++r)
                    if (rows[r][j]) uniq.insert(*rows[r][j]);
                col.vocabulary.assign(uniq.begin(), uniq.end());
            }
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (!rows[r][j]) {
                    col.values.push_back(missing_value);
                    continue;
                }
                auto it = std::find(col.vocabulary.begin(), col.vocabulary.end(), *rows[r][j]);
                if (it == col.vocabulary.end())
                    throw Error(ErrorKind::validation,
                                "value '" + *rows[r][j] + "' not in vocabulary of column '" + col.name + "'");
                col.values.push_back(static_cast<double>(it - col.vocabulary.begin()));
            }
        }
        columns.push_back(std::move(col));
    }
    ds.features = Table(std::move(columns));
    if (ds.features.cols() == 0) {
        // keep the row count even without features
        ds.features = Table{};
    }
    ds.validate();
    return ds;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::load, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::load, "cannot write '" + path + "'");
    out << content;
}

/// Serializes features (and the target, at its original position when `with_target`).
inline std::string dataset_to_csv(const Dataset& ds, bool with_target = true) {
    std::vector<std::string> header = ds.features.names();
    std::size_t tpos = std::min(ds.target_position, header.size());
    if (with_target) header.insert(header.begin() + static_cast<long>(tpos), ds.target);
    std::string out = csv::join(header) + "\n";
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        std::vector<std::string> cells;
        for (const auto& c : ds.features.columns()) cells.push_back(c.cell_string(r));
        if (with_target)
            cells.insert(cells.begin() + static_cast<long>(tpos),
                         ds.class_labels[static_cast<std::size_t>(ds.labels[r])]);
        out += csv::join(cells) + "\n";
    }
    return out;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Stratified split: per class, round(validation_fraction * n_class) rows go to validation.
inline Split stratified_split(const std::vector<int>& labels, std::size_t n_classes, std::uint64_t seed,
                              double validation_fraction = 0.25) {
    Split split;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == static_cast<int>(c)) idx.push_back(i);
        Rng rng(derive_seed(seed, 1000 + c));
        shuffle(idx, rng);
        auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(idx.size())));
        if (idx.size() >= 2 && n_val == 0) n_val = 1;
        if (n_val >= idx.size() && idx.size() >= 2) n_val = idx.size() - 1;
        split.validation.insert(split.validation.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
        split.train.insert(split.train.end(), idx.begin() + static_cast<long>(n_val), idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

/// Stratified seeded sample of at most `cap` row indices (sorted). Identity when rows <= cap.
inline std::vector<std::size_t> stratified_sample(const std::vector<int>& labels, std::size_t n_classes,
                                                  std::size_t cap, std::uint64_t seed) {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (labels.size() <= cap) return all;
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    // largest-remainder allocation
    std::vector<std::size_t> quota(n_classes);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        double exact = static_cast<double>(cap) * static_cast<double>(by_class[c].size()) /
                       static_cast<double>(labels.size());
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[c];
        remainders.push_back({-(exact - std::floor(exact)), c});
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < cap && k < remainders.size(); ++k, ++assigned) quota[remainders[k].second]++;
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto idx = by_class[c];
        Rng rng(derive_seed(seed, 2000 + c));
        shuffle(idx, rng);
        out.insert(out.end(), idx.begin(), idx.begin() + static_cast<long>(std::min(quota[c], idx.size())));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline json table_to_json(const Table& t, const std::vector<int>* labels = nullptr,
                          const std::vector<std::string>* class_labels = nullptr,
                          const std::string& target = "") {
    json j;
    j["columns"] = json::array();
    for (const auto& c : t.columns()) j["columns"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    j["rows"] = json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        json row = json::array();
        for (const auto& c : t.columns()) {
            double v = c.values[r];
            if (is_missing(v)) row.push_back(nullptr);
            else if (c.categorical()) row.push_back(c.vocabulary[static_cast<std::size_t>(v)]);
            else row.push_back(v);
        }
        j["rows"].push_back(row);
    }
    if (labels && class_labels) {
        j["target"] = target;
        j["labels"] = json::array();
        for (int l : *labels) j["labels"].push_back((*class_labels)[static_cast<std::size_t>(l)]);
    }
    return j;
}

}  // namespace runlens
