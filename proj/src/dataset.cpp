#include "dpsynth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace dpsynth {

void AttributeSpec::validate() const {
    if (name.empty()) throw ConfigError("attribute with empty name");
    if (kind == AttrKind::Categorical) {
        if (labels.empty()) throw ConfigError("attribute '" + name + "': empty label set");
        std::unordered_set<std::string> seen;
        for (const auto& l : labels) {
            if (!seen.insert(l).second)
                throw ConfigError("attribute '" + name + "': duplicate label '" + l + "'");
        }
    } else {
        if (!(lower <= upper))
            throw ConfigError("attribute '" + name + "': lower bound exceeds upper bound");
        if (declared_size < 1)
            throw ConfigError("attribute '" + name + "': declared size must be positive");
    }
}

AttributeSpec AttributeSpec::categorical(std::string name, std::vector<std::string> labels) {
    AttributeSpec a;
    a.name = std::move(name);
    a.kind = AttrKind::Categorical;
    a.labels = std::move(labels);
    a.validate();
    return a;
}

AttributeSpec AttributeSpec::numerical(std::string name, double lower, double upper,
                                       std::int64_t declared_size) {
    AttributeSpec a;
    a.name = std::move(name);
    a.kind = AttrKind::Numerical;
    a.lower = lower;
    a.upper = upper;
    a.declared_size = declared_size;
    a.validate();
    return a;
}

Domain::Domain(std::vector<AttributeSpec> attrs) : attrs_(std::move(attrs)) {
    for (std::size_t j = 0; j < attrs_.size(); ++j) {
        attrs_[j].validate();
        if (!by_name_.emplace(attrs_[j].name, j).second)
            throw ConfigError("duplicate attribute name '" + attrs_[j].name + "'");
    }
}

std::optional<std::size_t> Domain::find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

bool Domain::same_shape(const Domain& other) const {
    if (attrs_.size() != other.attrs_.size()) return false;
    for (std::size_t j = 0; j < attrs_.size(); ++j) {
        if (attrs_[j].name != other.attrs_[j].name) return false;
        if (attrs_[j].size() != other.attrs_[j].size()) return false;
    }
    return true;
}

Dataset::Dataset(Domain domain)
    : domain_(std::move(domain)),
      codes_(domain_.attr_count()),
      raw_(domain_.attr_count()),
      encoded_(domain_.attr_count(), false) {
    for (std::size_t j = 0; j < domain_.attr_count(); ++j)
        encoded_[j] = domain_.attr(j).kind == AttrKind::Categorical;
}

bool Dataset::fully_encoded() const {
    return std::all_of(encoded_.begin(), encoded_.end(), [](bool b) { return b; });
}

const std::vector<std::int32_t>& Dataset::codes(std::size_t j) const {
    if (!encoded_.at(j))
        throw DataError("attribute '" + domain_.attr(j).name +
                        "' is not integer-encoded; preprocess the dataset first");
    return codes_[j];
}

const std::vector<double>& Dataset::raw(std::size_t j) const {
    if (encoded_.at(j))
        throw DataError("attribute '" + domain_.attr(j).name + "' has no raw column");
    return raw_[j];
}

std::vector<std::int32_t>& Dataset::mutable_codes(std::size_t j) {
    if (!encoded_.at(j))
        throw DataError("attribute '" + domain_.attr(j).name + "' is not integer-encoded");
    return codes_[j];
}

void Dataset::check_sizes(std::size_t rows) {
    if (n_ == 0) {
        n_ = rows;
        return;
    }
    if (rows != n_) throw DataError("column length mismatch while assembling dataset");
}

void Dataset::set_encoded_column(std::size_t j, std::vector<std::int32_t> codes) {
    check_sizes(codes.size());
    codes_.at(j) = std::move(codes);
    raw_.at(j).clear();
    encoded_.at(j) = true;
}

void Dataset::set_raw_column(std::size_t j, std::vector<double> values) {
    check_sizes(values.size());
    raw_.at(j) = std::move(values);
    codes_.at(j).clear();
    encoded_.at(j) = false;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
    Dataset out(domain_);
    for (std::size_t j = 0; j < d(); ++j) {
        if (encoded_[j]) {
            std::vector<std::int32_t> col(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) col[i] = codes_[j][rows[i]];
            out.set_encoded_column(j, std::move(col));
        } else {
            std::vector<double> col(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) col[i] = raw_[j][rows[i]];
            out.set_raw_column(j, std::move(col));
        }
    }
    return out;
}

namespace {

using nlohmann::json;

AttributeSpec parse_attr(const json& node) {
    if (!node.is_object()) throw ConfigError("domain spec: attribute entry must be an object");
    if (!node.contains("name") || !node["name"].is_string())
        throw ConfigError("domain spec: attribute missing string 'name'");
    const std::string name = node["name"].get<std::string>();
    if (!node.contains("kind") || !node["kind"].is_string())
        throw ConfigError("domain spec: attribute '" + name + "' missing 'kind'");
    const std::string kind = node["kind"].get<std::string>();
    if (kind == "categorical") {
        if (!node.contains("labels") || !node["labels"].is_array())
            throw ConfigError("domain spec: categorical attribute '" + name +
                              "' needs a 'labels' array");
        std::vector<std::string> labels;
        for (const auto& l : node["labels"]) {
            if (!l.is_string())
                throw ConfigError("domain spec: attribute '" + name + "': labels must be strings");
            labels.push_back(l.get<std::string>());
        }
        return AttributeSpec::categorical(name, std::move(labels));
    }
    if (kind == "numerical") {
        for (const char* key : {"lower", "upper", "size"}) {
            if (!node.contains(key) || !node[key].is_number())
                throw ConfigError("domain spec: numerical attribute '" + name +
                                  "' needs numeric '" + key + "'");
        }
        return AttributeSpec::numerical(name, node["lower"].get<double>(),
                                        node["upper"].get<double>(),
                                        node["size"].get<std::int64_t>());
    }
    throw ConfigError("domain spec: attribute '" + name + "': unknown kind '" + kind + "'");
}

}  // namespace

Domain parse_domain(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("domain spec: invalid JSON: ") + e.what());
    }
    const json* list = nullptr;
    if (doc.is_array()) {
        list = &doc;
    } else if (doc.is_object() && doc.contains("attributes") && doc["attributes"].is_array()) {
        list = &doc["attributes"];
    } else {
        throw ConfigError(
            "domain spec: expected an attribute array or an object with 'attributes'");
    }
    std::vector<AttributeSpec> attrs;
    for (const auto& node : *list) attrs.push_back(parse_attr(node));
    if (attrs.empty()) throw ConfigError("domain spec: no attributes");
    return Domain(std::move(attrs));
}

Domain load_domain_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open domain spec file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_domain(ss.str());
}

std::string domain_to_json(const Domain& domain) {
    json list = json::array();
    for (const AttributeSpec& spec : domain.attrs()) {
        json node;
        node["name"] = spec.name;
        if (spec.kind == AttrKind::Categorical) {
            node["kind"] = "categorical";
            node["labels"] = spec.labels;
        } else {
            node["kind"] = "numerical";
            node["lower"] = spec.lower;
            node["upper"] = spec.upper;
            node["size"] = spec.declared_size;
        }
        list.push_back(std::move(node));
    }
    json doc;
    doc["attributes"] = std::move(list);
    return doc.dump(2);
}

namespace {

// Split one CSV line. Supports double-quoted fields with "" escapes; no
// embedded newlines (records are line-delimited).
std::vector<std::string> split_csv_line(const std::string& line, std::size_t row_for_errors) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
            ++i;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            ++i;
        } else {
            field += c;
            ++i;
        }
    }
    if (quoted)
        throw DataError("unterminated quoted field, row " + std::to_string(row_for_errors));
    out.push_back(std::move(field));
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

Dataset load_dataset(std::istream& csv, const Domain& domain) {
    std::string line;
    if (!std::getline(csv, line)) throw DataError("empty CSV input: missing header row");
    line = strip_cr(line);
    auto header = split_csv_line(line, 0);

    // Map file column -> domain attribute index.
    std::vector<std::size_t> col_attr(header.size());
    std::vector<bool> attr_seen(domain.attr_count(), false);
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto idx = domain.find(header[c]);
        if (!idx)
            throw DataError("CSV header column '" + header[c] + "' not found in domain spec");
        if (attr_seen[*idx])
            throw DataError("CSV header repeats column '" + header[c] + "'");
        attr_seen[*idx] = true;
        col_attr[c] = *idx;
    }
    for (std::size_t j = 0; j < domain.attr_count(); ++j) {
        if (!attr_seen[j])
            throw DataError("CSV is missing column '" + domain.attr(j).name + "'");
    }

    // Per-attribute label lookup for categorical columns.
    std::vector<std::unordered_map<std::string, std::int32_t>> lookup(domain.attr_count());
    for (std::size_t j = 0; j < domain.attr_count(); ++j) {
        const auto& a = domain.attr(j);
        if (a.kind != AttrKind::Categorical) continue;
        for (std::size_t k = 0; k < a.labels.size(); ++k)
            lookup[j].emplace(a.labels[k], static_cast<std::int32_t>(k));
    }

    std::vector<std::vector<std::int32_t>> codes(domain.attr_count());
    std::vector<std::vector<double>> raw(domain.attr_count());

    std::size_t row = 0;
    while (std::getline(csv, line)) {
        line = strip_cr(line);
        if (line.empty() && csv.peek() == std::istream::traits_type::eof()) break;
        auto cells = split_csv_line(line, row);
        if (cells.size() != header.size())
            throw DataError("wrong field count, row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + ", got " +
                            std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::size_t j = col_attr[c];
            const auto& a = domain.attr(j);
            const std::string& cell = cells[c];
            if (a.kind == AttrKind::Categorical) {
                auto it = lookup[j].find(cell);
                if (it == lookup[j].end())
                    throw DataError("out-of-domain label '" + cell + "', row " +
                                    std::to_string(row) + ", col " + std::to_string(c) +
                                    " (attribute '" + a.name + "')");
                codes[j].push_back(it->second);
            } else {
                double v = 0.0;
                try {
                    std::size_t pos = 0;
                    v = std::stod(cell, &pos);
                    while (pos < cell.size() &&
                           (cell[pos] == ' ' || cell[pos] == '\t'))
                        ++pos;
                    if (pos != cell.size()) throw std::invalid_argument("trailing junk");
                } catch (const std::exception&) {
                    throw DataError("unparseable numeric value '" + cell + "', row " +
                                    std::to_string(row) + ", col " + std::to_string(c) +
                                    " (attribute '" + a.name + "')");
                }
                if (!(v >= a.lower && v <= a.upper))
                    throw DataError("out-of-range value '" + cell + "', row " +
                                    std::to_string(row) + ", col " + std::to_string(c) +
                                    " (attribute '" + a.name + "': bounds [" +
                                    std::to_string(a.lower) + ", " + std::to_string(a.upper) +
                                    "])");
                raw[j].push_back(v);
            }
        }
        ++row;
    }
    if (row == 0) throw DataError("CSV has a header but no data rows");

    Dataset out{Domain(domain)};
    for (std::size_t j = 0; j < domain.attr_count(); ++j) {
        if (domain.attr(j).kind == AttrKind::Categorical)
            out.set_encoded_column(j, std::move(codes[j]));
        else
            out.set_raw_column(j, std::move(raw[j]));
    }
    return out;
}

Dataset load_dataset_file(const std::string& csv_path, const Domain& domain) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open CSV file '" + csv_path + "'");
    return load_dataset(in, domain);
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test fraction must lie strictly between 0 and 1");
    const std::size_t n = data.n();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * double(n)));
    if (n_test == 0 || n_test >= n)
        throw DataError("train/test split would leave an empty side (n=" + std::to_string(n) +
                        ", test rows=" + std::to_string(n_test) + ")");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    Rng shuffle_rng = rng.substream("train-test-split");
    for (std::size_t i = n; i > 1; --i) {
        std::size_t k = shuffle_rng.uniform_int(i);
        std::swap(order[i - 1], order[k]);
    }
    std::vector<std::size_t> test_rows(order.begin(), order.begin() + n_test);
    std::vector<std::size_t> train_rows(order.begin() + n_test, order.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    return {data.select_rows(train_rows), data.select_rows(test_rows)};
}

}  // namespace dpsynth
