#include "causalfair/tabular.hpp"

#include "causalfair/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace causalfair::tabular {

std::string_view to_string(ColumnKind kind) noexcept {
    return kind == ColumnKind::numeric ? "numeric" : "nominal";
}

int ColumnSpec::level_index(std::string_view label) const noexcept {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == label) return static_cast<int>(i);
    return -1;
}

// ---------------------------------------------------------------------------

Dataset::Dataset(std::string name, std::vector<ColumnSpec> schema, std::vector<std::vector<double>> columns,
                 std::optional<std::string> label)
    : name_(std::move(name)), schema_(std::move(schema)), columns_(std::move(columns)), label_(std::move(label)) {
    if (schema_.size() != columns_.size())
        throw DataError("schema has " + std::to_string(schema_.size()) + " columns but " +
                        std::to_string(columns_.size()) + " column vectors were given");
    if (schema_.size() < 2) throw DataError("dataset needs at least 2 columns");
    const std::size_t n = columns_.front().size();
    if (n == 0) throw DataError("dataset has no rows");

    std::set<std::string> seen;
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        const ColumnSpec& s = schema_[j];
        if (!seen.insert(s.name).second) throw DataError("duplicate column name '" + s.name + "'");
        if (columns_[j].size() != n) throw DataError("column '" + s.name + "' has a different row count");
        if (s.nominal()) {
            if (s.levels.size() < 2)
                throw DataError("nominal column '" + s.name + "' has fewer than 2 levels");
            std::set<std::string> lv(s.levels.begin(), s.levels.end());
            if (lv.size() != s.levels.size()) throw DataError("nominal column '" + s.name + "' repeats a level");
            const double hi = static_cast<double>(s.levels.size());
            for (double v : columns_[j])
                if (!(v >= 0 && v < hi) || v != std::floor(v))
                    throw DataError("nominal column '" + s.name + "' holds an invalid level code");
            if (s.favorable_level && s.level_index(*s.favorable_level) < 0)
                throw DataError("favorable level '" + *s.favorable_level + "' is not a level of '" + s.name + "'");
        } else {
            if (!s.levels.empty()) throw DataError("numeric column '" + s.name + "' must not carry levels");
            for (double v : columns_[j])
                if (!std::isfinite(v)) throw DataError("numeric column '" + s.name + "' holds a non-finite value");
        }
    }
    if (label_ && !seen.count(*label_)) throw DataError("label column '" + *label_ + "' is not in the schema");
}

std::vector<std::string> Dataset::column_names() const {
    std::vector<std::string> out;
    out.reserve(schema_.size());
    for (const auto& s : schema_) out.push_back(s.name);
    return out;
}

std::optional<std::size_t> Dataset::find(std::string_view column) const noexcept {
    for (std::size_t j = 0; j < schema_.size(); ++j)
        if (schema_[j].name == column) return j;
    return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view column) const {
    if (auto j = find(column)) return *j;
    throw DataError("unknown column '" + std::string(column) + "'");
}

std::vector<double> Dataset::row(std::size_t row) const {
    std::vector<double> out(cols());
    for (std::size_t j = 0; j < cols(); ++j) out[j] = columns_[j][row];
    return out;
}

Dataset Dataset::with_column(std::size_t col, std::vector<double> values) const {
    auto columns = columns_;
    columns.at(col) = std::move(values);
    return Dataset(name_, schema_, std::move(columns), label_);
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::vector<double>> columns(cols());
    for (std::size_t j = 0; j < cols(); ++j) {
        columns[j].reserve(rows.size());
        for (std::size_t r : rows) columns[j].push_back(columns_[j].at(r));
    }
    return Dataset(name_, schema_, std::move(columns), label_);
}

Dataset Dataset::renamed(std::string name) const {
    Dataset copy = *this;
    copy.name_ = std::move(name);
    return copy;
}

bool Dataset::same_content(const Dataset& other) const noexcept {
    return schema_ == other.schema_ && columns_ == other.columns_;
}

// ---------------------------------------------------------------------------
// Schema files

SchemaHint parse_schema(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("schema is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("schema must be a JSON object");
    SchemaHint hint;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!it.value().is_string()) throw DataError("schema entry '" + it.key() + "' must be a string");
        const auto value = it.value().get<std::string>();
        if (it.key() == "label") {
            hint.label = value;
        } else if (it.key() == "favorable") {
            hint.favorable = value;
        } else if (value == "numeric") {
            hint.kinds[it.key()] = ColumnKind::numeric;
        } else if (value == "nominal") {
            hint.kinds[it.key()] = ColumnKind::nominal;
        } else {
            throw DataError("schema entry '" + it.key() + "' must be \"numeric\" or \"nominal\"");
        }
    }
    return hint;
}

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Splits CSV text into records. Handles quoted fields, doubled quotes
/// and \n or \r\n terminators.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    std::size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                any = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                [[fallthrough]];
            case '\n':
                if (any || !field.empty()) {
                    record.push_back(std::move(field));
                    records.push_back(std::move(record));
                }
                record.clear();
                field.clear();
                any = false;
                break;
            default:
                field.push_back(c);
                any = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted field");
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool empty_cell(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

SchemaHint read_schema(const std::string& path) { return parse_schema(slurp(path)); }

LoadResult load_csv(const std::string& path, const std::optional<SchemaHint>& hint) {
    std::string name = path;
    if (auto slash = name.find_last_of("/\\"); slash != std::string::npos) name = name.substr(slash + 1);
    if (auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    return parse_csv(slurp(path), std::move(name), hint);
}

LoadResult parse_csv(std::string_view text, std::string name, const std::optional<SchemaHint>& hint) {
    auto records = split_records(text);
    if (records.empty()) throw DataError("CSV has no header row");
    const std::vector<std::string> header = std::move(records.front());
    const std::size_t m = header.size();

    if (hint) {
        for (const auto& [col, kind] : hint->kinds)
            if (std::find(header.begin(), header.end(), col) == header.end())
                throw DataError("schema names column '" + col + "' which is not in the CSV header");
        if (hint->label && std::find(header.begin(), header.end(), *hint->label) == header.end())
            throw DataError("schema label '" + *hint->label + "' is not in the CSV header");
    }

    std::vector<std::vector<std::string>> rows;
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& rec = records[r];
        if (rec.size() != m)
            throw DataError("row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                            " fields, header has " + std::to_string(m));
        if (std::any_of(rec.begin(), rec.end(), [](const std::string& s) { return empty_cell(s); })) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(rec));
    }
    if (rows.empty()) throw DataError("CSV has zero usable rows");

    std::vector<ColumnSpec> schema(m);
    std::vector<std::vector<double>> columns(m, std::vector<double>(rows.size()));
    for (std::size_t j = 0; j < m; ++j) {
        ColumnSpec& spec = schema[j];
        spec.name = header[j];
        std::optional<ColumnKind> forced;
        if (hint) {
            if (auto it = hint->kinds.find(spec.name); it != hint->kinds.end()) forced = it->second;
        }
        bool numeric = true;
        if (forced) {
            numeric = *forced == ColumnKind::numeric;
        } else {
            for (const auto& row : rows)
                if (!parse_number(row[j])) {
                    numeric = false;
                    break;
                }
        }
        if (numeric) {
            spec.kind = ColumnKind::numeric;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                auto v = parse_number(rows[r][j]);
                if (!v)
                    throw DataError("column '" + spec.name + "' is declared numeric but row " +
                                    std::to_string(r + 2) + " holds '" + rows[r][j] + "'");
                columns[j][r] = *v;
            }
        } else {
            spec.kind = ColumnKind::nominal;
            const std::vector<std::string>* fixed = nullptr;
            if (hint) {
                if (auto it = hint->levels.find(spec.name); it != hint->levels.end()) fixed = &it->second;
            }
            if (fixed) {
                spec.levels = *fixed;
            } else {
                std::set<std::string> distinct;
                for (const auto& row : rows) distinct.insert(row[j]);
                if (distinct.size() < 2)
                    throw DataError("nominal column '" + spec.name + "' has only one level after load");
                spec.levels.assign(distinct.begin(), distinct.end());
            }
            std::map<std::string, int> index;
            for (std::size_t l = 0; l < spec.levels.size(); ++l) index[spec.levels[l]] = static_cast<int>(l);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                auto it = index.find(rows[r][j]);
                if (it == index.end())
                    throw DataError("column '" + spec.name + "' row " + std::to_string(r + 2) + " holds unknown level '" +
                                    rows[r][j] + "'");
                columns[j][r] = it->second;
            }
        }
    }

    std::optional<std::string> label;
    if (hint && hint->label) {
        label = hint->label;
        auto& spec = schema[static_cast<std::size_t>(
            std::find(header.begin(), header.end(), *label) - header.begin())];
        if (hint->favorable) {
            if (!spec.nominal()) throw DataError("label column '" + *label + "' must be nominal");
            if (spec.level_index(*hint->favorable) < 0)
                throw DataError("favorable level '" + *hint->favorable + "' does not occur in '" + *label + "'");
            spec.favorable_level = hint->favorable;
        }
    }
    return {Dataset(std::move(name), std::move(schema), std::move(columns), std::move(label)), dropped};
}

SchemaHint hint_of(const Dataset& data) {
    SchemaHint h;
    for (const auto& spec : data.schema()) {
        h.kinds[spec.name] = spec.kind;
        if (spec.nominal()) h.levels[spec.name] = spec.levels;
        if (spec.favorable_level) h.favorable = spec.favorable_level;
    }
    h.label = data.label();
    return h;
}

std::string format_number(double value) {
    if (value == 0.0) return "0";  // folds -0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

namespace {

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

void write_csv(const Dataset& data, std::ostream& out) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
        if (j) out << ',';
        out << quote_if_needed(data.spec(j).name);
    }
    out << '\n';
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            if (j) out << ',';
            const auto& spec = data.spec(j);
            if (spec.nominal())
                out << quote_if_needed(spec.levels[static_cast<std::size_t>(data.code(r, j))]);
            else
                out << format_number(data.at(r, j));
        }
        out << '\n';
    }
}

std::string to_csv(const Dataset& data) {
    std::ostringstream ss;
    write_csv(data, ss);
    return ss.str();
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file '" + path + "'");
    write_csv(data, out);
}

// ---------------------------------------------------------------------------
// Encoding

int modal_level(std::span<const double> codes, const ColumnSpec& spec) {
    std::vector<std::size_t> counts(spec.levels.size(), 0);
    for (double c : codes) ++counts[static_cast<std::size_t>(c)];
    int best = 0;
    for (std::size_t l = 1; l < counts.size(); ++l) {
        const auto b = static_cast<std::size_t>(best);
        if (counts[l] > counts[b] || (counts[l] == counts[b] && spec.levels[l] < spec.levels[b]))
            best = static_cast<int>(l);
    }
    return best;
}

Encoder Encoder::fit(const Dataset& data, std::span<const std::string> targets, bool standardize_numeric) {
    Encoder enc;
    const double n = static_cast<double>(data.rows());
    for (const auto& name : targets) {
        const std::size_t j = data.index_of(name);
        const auto& spec = data.spec(j);
        const auto col = data.column(j);
        EncodedSource src;
        src.name = spec.name;
        src.kind = spec.kind;
        const std::size_t s = enc.sources_.size();
        if (spec.nominal()) {
            src.reference_level = modal_level(col, spec);
            src.level_count = spec.levels.size();
            const auto ref = static_cast<double>(src.reference_level);
            if (std::all_of(col.begin(), col.end(), [ref](double v) { return v == ref; }))
                enc.warnings_.push_back("column '" + spec.name + "' has a single observed level; its dummies are constant");
            for (std::size_t l = 0; l < spec.levels.size(); ++l)
                if (static_cast<int>(l) != src.reference_level)
                    enc.columns_.push_back({s, spec.name, static_cast<int>(l)});
        } else {
            if (standardize_numeric) {
                const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
                double ss = 0;
                for (double v : col) ss += (v - mean) * (v - mean);
                double sd = std::sqrt(ss / n);
                if (sd == 0) {
                    enc.warnings_.push_back("column '" + spec.name + "' has zero variance; left centred only");
                    sd = 1.0;
                }
                src.standardization = Standardization{mean, sd};
            }
            enc.columns_.push_back({s, spec.name, std::nullopt});
        }
        enc.sources_.push_back(std::move(src));
    }
    return enc;
}

void Encoder::transform_row(const Dataset& data, std::size_t row, std::span<double> out) const {
    // Source columns are looked up per call; callers encoding many rows
    // should prefer transform().
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        const auto& src = sources_[col.source];
        const double v = data.at(row, data.index_of(src.name));
        if (col.level)
            out[c] = static_cast<int>(v) == *col.level ? 1.0 : 0.0;
        else if (src.standardization)
            out[c] = (v - src.standardization->mean) / src.standardization->std;
        else
            out[c] = v;
    }
}

EncodedMatrix Encoder::transform(const Dataset& data) const {
    EncodedMatrix em;
    em.sources = sources_;
    em.column_map = columns_;
    em.warnings = warnings_;
    const std::size_t n = data.rows();
    em.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns_.size()));
    std::vector<std::size_t> source_col(sources_.size());
    for (std::size_t s = 0; s < sources_.size(); ++s) {
        source_col[s] = data.index_of(sources_[s].name);
        if (data.spec(source_col[s]).kind != sources_[s].kind)
            throw DataError("column '" + sources_[s].name + "' changed kind since the encoder was fitted");
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        const auto& src = sources_[col.source];
        const auto cells = data.column(source_col[col.source]);
        const auto ci = static_cast<Eigen::Index>(c);
        for (std::size_t r = 0; r < n; ++r) {
            const double v = cells[r];
            double x;
            if (col.level)
                x = static_cast<int>(v) == *col.level ? 1.0 : 0.0;
            else if (src.standardization)
                x = (v - src.standardization->mean) / src.standardization->std;
            else
                x = v;
            em.values(static_cast<Eigen::Index>(r), ci) = x;
        }
    }
    return em;
}

EncodedMatrix encode(const Dataset& data, std::span<const std::string> targets, bool standardize_numeric) {
    return Encoder::fit(data, targets, standardize_numeric).transform(data);
}

std::map<std::string, std::vector<double>> decode(const EncodedMatrix& encoded) {
    const auto n = static_cast<std::size_t>(encoded.values.rows());
    std::map<std::string, std::vector<double>> out;
    for (const auto& src : encoded.sources)
        out[src.name] = std::vector<double>(n, src.kind == ColumnKind::nominal ? src.reference_level : 0.0);
    for (std::size_t c = 0; c < encoded.column_map.size(); ++c) {
        const auto& col = encoded.column_map[c];
        const auto& src = encoded.sources[col.source];
        auto& dst = out[src.name];
        for (std::size_t r = 0; r < n; ++r) {
            const double x = encoded.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            if (col.level) {
                if (x == 1.0) dst[r] = *col.level;
            } else if (src.standardization) {
                dst[r] = x * src.standardization->std + src.standardization->mean;
            } else {
                dst[r] = x;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gower

std::vector<double> numeric_ranges(const Dataset& data) {
    std::vector<double> ranges(data.cols(), 0.0);
    for (std::size_t j = 0; j < data.cols(); ++j) {
        if (data.spec(j).nominal()) continue;
        const auto col = data.column(j);
        auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        ranges[j] = *hi - *lo;
    }
    return ranges;
}

double gower_row_distance(std::span<const double> a, std::span<const double> b,
                          std::span<const ColumnSpec> schema, std::span<const double> ranges) {
    double total = 0;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].nominal()) {
            total += a[j] == b[j] ? 0.0 : 1.0;
        } else if (ranges[j] > 0) {
            total += std::min(1.0, std::abs(a[j] - b[j]) / ranges[j]);
        }
    }
    return schema.empty() ? 0.0 : total / static_cast<double>(schema.size());
}

}  // namespace causalfair::tabular
