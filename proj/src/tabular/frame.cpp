#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "multidx/tabular.hpp"

namespace multidx::tabular {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    return text;
}

bool is_missing_token(std::string_view cell) {
    if (cell.empty()) return true;
    const std::string l = lower(cell);
    return l == "na" || l == "nan" || l == "null" || l == "?";
}

std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string location(std::size_t row, const std::string& column) {
    return "row " + std::to_string(row + 1) + ", column '" + column + "'";
}

}  // namespace

std::string_view to_string(FeatureKind kind) noexcept {
    switch (kind) {
        case FeatureKind::Numeric: return "numeric";
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Binary: return "binary";
    }
    return "numeric";
}

FeatureKind feature_kind_from_string(std::string_view text) {
    const std::string l = lower(text);
    if (l == "numeric") return FeatureKind::Numeric;
    if (l == "categorical") return FeatureKind::Categorical;
    if (l == "binary") return FeatureKind::Binary;
    fail(ErrorCode::Data, "unknown feature kind '" + std::string(text) + "'");
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return i;
    return std::nullopt;
}

void FeatureSchema::validate() const {
    require(feature_kinds.size() == feature_names.size(), ErrorCode::InvalidArgument,
            "schema: feature_kinds length differs from feature_names");
    require(categories.empty() || categories.size() == feature_names.size(), ErrorCode::InvalidArgument,
            "schema: categories length differs from feature_names");
    std::set<std::string_view> seen;
    for (const auto& name : feature_names) {
        require(seen.insert(name).second, ErrorCode::InvalidArgument, "schema: duplicate feature name '" + name + "'");
        require(name != label_name, ErrorCode::InvalidArgument, "schema: label '" + name + "' listed as a feature");
    }
    require(class_names.size() >= 2, ErrorCode::InvalidArgument, "schema: at least two class names required");
}

FeatureSchema FeatureSchema::numeric(std::vector<std::string> names, std::string label_name,
                                     std::vector<std::string> class_names) {
    FeatureSchema schema;
    schema.feature_kinds.assign(names.size(), FeatureKind::Numeric);
    schema.feature_names = std::move(names);
    schema.label_name = std::move(label_name);
    schema.class_names = std::move(class_names);
    return schema;
}

bool FeatureFrame::is_missing(std::size_t r, std::size_t c) const noexcept { return std::isnan(values(r, c)); }

std::optional<double> FeatureFrame::at(std::size_t r, std::size_t c) const noexcept {
    if (is_missing(r, c)) return std::nullopt;
    return values(r, c);
}

bool FeatureFrame::has_missing() const noexcept {
    return std::any_of(values.data().begin(), values.data().end(), [](double v) { return std::isnan(v); });
}

void FeatureFrame::validate() const {
    schema.validate();
    require(values.cols() == schema.width() || values.rows() == 0, ErrorCode::InvalidArgument,
            "frame: row width " + std::to_string(values.cols()) + " differs from schema width " +
                std::to_string(schema.width()));
    if (labels) {
        require(labels->size() == values.rows(), ErrorCode::InvalidArgument, "frame: one label per row required");
        for (int label : *labels)
            require(label >= 0 && static_cast<std::size_t>(label) < schema.class_names.size(),
                    ErrorCode::InvalidArgument, "frame: label " + std::to_string(label) + " out of range");
    }
}

FeatureFrame FeatureFrame::select_rows(std::span<const std::size_t> indices) const {
    FeatureFrame out{schema, values.select_rows(indices), std::nullopt};
    if (labels) {
        std::vector<int> picked;
        picked.reserve(indices.size());
        for (std::size_t i : indices) picked.push_back((*labels)[i]);
        out.labels = std::move(picked);
    }
    return out;
}

std::vector<std::size_t> FeatureFrame::class_counts() const {
    require(labeled(), ErrorCode::InvalidArgument, "frame is unlabeled");
    std::vector<std::size_t> counts(schema.class_names.size(), 0);
    for (int label : *labels) ++counts[static_cast<std::size_t>(label)];
    return counts;
}

bool operator==(const FeatureFrame& a, const FeatureFrame& b) {
    if (!(a.schema == b.schema) || a.labels != b.labels) return false;
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) return false;
    const auto& x = a.values.data();
    const auto& y = b.values.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i]) != std::isnan(y[i])) return false;
        if (!std::isnan(x[i]) && x[i] != y[i]) return false;
    }
    return true;
}

CsvTable parse_csv_table(std::string_view text, char delimiter) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_quoted = false;
    bool record_has_content = false;

    auto end_field = [&] {
        record.push_back(field_quoted ? field : std::string(trim(field)));
        field.clear();
        field_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = record.size() == 1 && record.front().empty() && !record_has_content;
        if (!blank) records.push_back(std::move(record));
        record.clear();
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && trim(field).empty()) {
            field.clear();
            in_quotes = true;
            field_quoted = true;
            record_has_content = true;
        } else if (ch == delimiter) {
            end_field();
            record_has_content = true;
        } else if (ch == '\n') {
            end_record();
        } else if (ch == '\r') {
            // CRLF: the '\n' ends the record
        } else {
            field.push_back(ch);
            record_has_content = true;
        }
    }
    require(!in_quotes, ErrorCode::Data, "csv: unterminated quoted field");
    if (!field.empty() || !record.empty() || record_has_content) end_record();

    require(!records.empty(), ErrorCode::Data, "csv: header row missing");
    CsvTable table;
    table.header = std::move(records.front());
    if (!table.header.empty() && table.header.front().rfind("\xEF\xBB\xBF", 0) == 0)
        table.header.front().erase(0, 3);
    for (std::size_t r = 1; r < records.size(); ++r) {
        require(records[r].size() == table.header.size(), ErrorCode::Data,
                "csv: row " + std::to_string(r) + " has " + std::to_string(records[r].size()) + " fields, header has " +
                    std::to_string(table.header.size()));
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

FeatureFrame frame_from_table(const CsvTable& table, const FeatureSchema& schema, const CsvOptions& options) {
    schema.validate();
    auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < table.header.size(); ++i)
            if (table.header[i] == name) return i;
        return std::nullopt;
    };

    std::vector<std::size_t> source(schema.width());
    std::vector<std::string> missing_columns;
    for (std::size_t c = 0; c < schema.width(); ++c) {
        if (auto idx = column_of(schema.feature_names[c])) source[c] = *idx;
        else missing_columns.push_back(schema.feature_names[c]);
    }
    if (!missing_columns.empty()) {
        std::string list;
        for (const auto& name : missing_columns) list += (list.empty() ? "'" : ", '") + name + "'";
        fail(ErrorCode::Data, "schema mismatch: missing column " + list);
    }
    const auto label_column = column_of(schema.label_name);
    require(label_column.has_value() || !options.require_labels, ErrorCode::Data,
            "schema mismatch: missing label column '" + schema.label_name + "'");

    FeatureFrame frame;
    frame.schema = schema;
    if (frame.schema.categories.empty()) frame.schema.categories.resize(schema.width());
    frame.values = Matrix(table.rows.size(), schema.width());
    std::vector<int> labels;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        for (std::size_t c = 0; c < schema.width(); ++c) {
            const std::string& name = schema.feature_names[c];
            const std::string_view cell = row[source[c]];
            double value = kMissing;
            if (!is_missing_token(cell)) {
                switch (schema.feature_kinds[c]) {
                    case FeatureKind::Numeric: {
                        auto parsed = parse_double(cell);
                        require(parsed.has_value(), ErrorCode::Data,
                                "non-numeric value '" + std::string(cell) + "' at " + location(r, name));
                        value = *parsed;
                        break;
                    }
                    case FeatureKind::Binary: {
                        const std::string l = lower(cell);
                        if (l == "1" || l == "true" || l == "yes") value = 1.0;
                        else if (l == "0" || l == "false" || l == "no") value = 0.0;
                        else if (auto parsed = parse_double(cell); parsed && (*parsed == 0.0 || *parsed == 1.0)) value = *parsed;
                        else fail(ErrorCode::Data, "non-binary value '" + std::string(cell) + "' at " + location(r, name));
                        break;
                    }
                    case FeatureKind::Categorical: {
                        auto& levels = frame.schema.categories[c];
                        auto it = std::find(levels.begin(), levels.end(), cell);
                        if (it == levels.end()) {
                            levels.emplace_back(cell);
                            it = levels.end() - 1;
                        }
                        value = static_cast<double>(it - levels.begin());
                        break;
                    }
                }
            }
            frame.values(r, c) = value;
        }
        if (label_column) {
            const std::string_view cell = row[*label_column];
            require(!is_missing_token(cell), ErrorCode::Data, "missing label at row " + std::to_string(r + 1));
            int label = -1;
            for (std::size_t k = 0; k < schema.class_names.size(); ++k)
                if (schema.class_names[k] == cell) label = static_cast<int>(k);
            if (label < 0) {
                auto parsed = parse_double(cell);
                if (parsed && *parsed >= 0 && std::floor(*parsed) == *parsed &&
                    *parsed < static_cast<double>(schema.class_names.size()))
                    label = static_cast<int>(*parsed);
            }
            require(label >= 0, ErrorCode::Data, "unknown class '" + std::string(cell) + "' at " + location(r, schema.label_name));
            labels.push_back(label);
        }
    }
    bool any_levels = std::any_of(frame.schema.categories.begin(), frame.schema.categories.end(),
                                  [](const auto& levels) { return !levels.empty(); });
    if (!any_levels) frame.schema.categories.clear();
    if (label_column) frame.labels = std::move(labels);
    return frame;
}

FeatureFrame read_csv(const std::filesystem::path& path, const FeatureSchema& schema, const CsvOptions& options) {
    return frame_from_table(parse_csv_table(read_text_file(path), options.delimiter), schema, options);
}

FeatureSchema schema_from_json(const nlohmann::json& json) {
    FeatureSchema schema;
    try {
        schema.feature_names = json.at("feature_names").get<std::vector<std::string>>();
        if (json.contains("feature_kinds")) {
            for (const auto& kind : json.at("feature_kinds")) schema.feature_kinds.push_back(feature_kind_from_string(kind.get<std::string>()));
        } else {
            schema.feature_kinds.assign(schema.feature_names.size(), FeatureKind::Numeric);
        }
        schema.label_name = json.at("label_name").get<std::string>();
        schema.class_names = json.at("class_names").get<std::vector<std::string>>();
        if (json.contains("categories")) schema.categories = json.at("categories").get<std::vector<std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Data, std::string("schema json: ") + e.what());
    }
    schema.validate();
    return schema;
}

nlohmann::json schema_to_json(const FeatureSchema& schema) {
    nlohmann::json kinds = nlohmann::json::array();
    for (auto kind : schema.feature_kinds) kinds.push_back(std::string(to_string(kind)));
    nlohmann::json out{{"feature_names", schema.feature_names},
                       {"feature_kinds", kinds},
                       {"label_name", schema.label_name},
                       {"class_names", schema.class_names}};
    if (!schema.categories.empty()) out["categories"] = schema.categories;
    return out;
}

FeatureSchema read_schema_json(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    nlohmann::json json;
    try {
        json = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Data, "schema json '" + path.string() + "': " + e.what());
    }
    return schema_from_json(json);
}

}  // namespace multidx::tabular
