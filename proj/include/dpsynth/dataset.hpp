#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpsynth/common.hpp"
#include "dpsynth/rng.hpp"

namespace dpsynth {

enum class AttrKind { Categorical, Numerical };

// Public description of one attribute. Domain information (label sets,
// numerical bounds, distinct-value counts) is treated as public knowledge and
// never consumes privacy budget.
struct AttributeSpec {
    std::string name;
    AttrKind kind = AttrKind::Categorical;

    // Categorical: ordered, duplicate-free label list; code = label index.
    std::vector<std::string> labels;

    // Numerical: inclusive public bounds and declared distinct-value count.
    double lower = 0.0;
    double upper = 0.0;
    std::int64_t declared_size = 0;

    std::int64_t size() const {
        return kind == AttrKind::Categorical ? static_cast<std::int64_t>(labels.size())
                                             : declared_size;
    }

    void validate() const;

    static AttributeSpec categorical(std::string name, std::vector<std::string> labels);
    static AttributeSpec numerical(std::string name, double lower, double upper,
                                   std::int64_t declared_size);
};

class Domain {
public:
    Domain() = default;
    explicit Domain(std::vector<AttributeSpec> attrs);

    std::size_t attr_count() const { return attrs_.size(); }
    const AttributeSpec& attr(std::size_t j) const { return attrs_.at(j); }
    const std::vector<AttributeSpec>& attrs() const { return attrs_; }
    std::int64_t size(std::size_t j) const { return attrs_.at(j).size(); }

    // Index of a named attribute, or nullopt.
    std::optional<std::size_t> find(const std::string& name) const;

    bool same_shape(const Domain& other) const;

private:
    std::vector<AttributeSpec> attrs_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

// Column-major record table. Categorical columns are integer-encoded at load
// time; numerical columns stay as raw reals until preprocessing assigns bin
// codes. Immutable apart from the synthesis paths that construct their own
// instances.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(Domain domain);

    const Domain& domain() const { return domain_; }
    std::size_t n() const { return n_; }
    std::size_t d() const { return domain_.attr_count(); }

    bool encoded(std::size_t j) const { return encoded_.at(j); }
    bool fully_encoded() const;

    const std::vector<std::int32_t>& codes(std::size_t j) const;
    const std::vector<double>& raw(std::size_t j) const;

    std::int32_t code(std::size_t row, std::size_t col) const { return codes(col)[row]; }

    // Mutable access for synthesizers building/updating their own tables.
    std::vector<std::int32_t>& mutable_codes(std::size_t j);

    // Construction helpers.
    void set_encoded_column(std::size_t j, std::vector<std::int32_t> codes);
    void set_raw_column(std::size_t j, std::vector<double> values);

    // Subset of rows, order given by `rows`.
    Dataset select_rows(const std::vector<std::size_t>& rows) const;

private:
    Domain domain_;
    std::size_t n_ = 0;
    std::vector<std::vector<std::int32_t>> codes_;
    std::vector<std::vector<double>> raw_;
    std::vector<bool> encoded_;

    void check_sizes(std::size_t rows);
};

// Parse a domain spec document (JSON text). Schema: list of attribute objects
// {"name", "kind": "categorical"|"numerical", "labels" | ("lower","upper","size")}.
Domain parse_domain(const std::string& json_text);
Domain load_domain_file(const std::string& path);

// Inverse of parse_domain: serialize to the same schema.
std::string domain_to_json(const Domain& domain);

// CSV ingestion. The header row must carry exactly the domain's attribute
// names (any order). Cells must parse under their AttributeSpec; errors carry
// row/column coordinates (0-based data rows).
Dataset load_dataset(std::istream& csv, const Domain& domain);
Dataset load_dataset_file(const std::string& csv_path, const Domain& domain);

// Deterministic disjoint partition; test side gets round(n * test_fraction)
// rows. Throws DataError if either side would be empty.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

}  // namespace dpsynth
