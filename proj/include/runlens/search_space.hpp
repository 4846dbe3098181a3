#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"

namespace runlens {

enum class HpKind { continuous, integer, categorical };

inline std::string_view to_string(HpKind kind) {
    switch (kind) {
        case HpKind::continuous: return "numeric-continuous";
        case HpKind::integer: return "numeric-integer";
        case HpKind::categorical: return "categorical";
    }
    return "";
}

inline HpKind hp_kind_from_string(std::string_view s) {
    if (s == "numeric-continuous") return HpKind::continuous;
    if (s == "numeric-integer") return HpKind::integer;
    if (s == "categorical") return HpKind::categorical;
    throw Error(ErrorKind::load, "unknown hyperparameter kind '" + std::string(s) + "'");
}

/// Activation rule: the hyperparameter is active iff `parent` is active and equals `value`.
struct Condition {
    std::string parent;
    Value value;

    bool operator==(const Condition&) const = default;
};

struct Hyperparameter {
    std::string name;
    HpKind kind = HpKind::continuous;
    double lower = 0.0;
    double upper = 1.0;
    std::vector<std::string> choices;
    Value default_value = 0.0;
    std::optional<Condition> condition;
    bool log_scale = false;

    bool numeric() const { return kind != HpKind::categorical; }

    bool contains(const Value& v) const {
        if (numeric()) {
            if (!is_numeric(v)) return false;
            double x = as_number(v);
            if (!(x >= lower && x <= upper)) return false;
            return kind != HpKind::integer || x == std::floor(x);
        }
        if (is_numeric(v)) return false;
        return std::find(choices.begin(), choices.end(), as_string(v)) != choices.end();
    }

    /// Index of a categorical choice, or -1.
    int choice_index(const std::string& c) const {
        auto it = std::find(choices.begin(), choices.end(), c);
        return it == choices.end() ? -1 : static_cast<int>(it - choices.begin());
    }
};

using Config = std::map<std::string, Value>;

class SearchSpace {
public:
    SearchSpace() = default;

    explicit SearchSpace(std::vector<Hyperparameter> hps,
                         std::optional<json> structure_template = std::nullopt)
        : hps_(std::move(hps)), structure_template_(std::move(structure_template)) {
        for (std::size_t i = 0; i < hps_.size(); ++i) {
            if (!index_.emplace(hps_[i].name, i).second)
                throw Error(ErrorKind::validation, "duplicate hyperparameter '" + hps_[i].name + "'");
        }
        validate();
    }

    const std::vector<Hyperparameter>& hyperparameters() const { return hps_; }
    const std::optional<json>& structure_template() const { return structure_template_; }
    std::size_t size() const { return hps_.size(); }
    bool empty() const { return hps_.empty(); }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Hyperparameter& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw Error(ErrorKind::not_found, "unknown hyperparameter '" + name + "'");
        return hps_[it->second];
    }

    /// Root hyperparameters have depth 1; each condition hop adds one.
    int depth(const std::string& name) const {
        int d = 1;
        const Hyperparameter* hp = &at(name);
        while (hp->condition) {
            hp = &at(hp->condition->parent);
            ++d;
        }
        return d;
    }

    /// Whether `name` is active under `config` (its whole condition chain holds).
    bool is_active(const std::string& name, const Config& config) const {
        const Hyperparameter* hp = &at(name);
        while (hp->condition) {
            auto it = config.find(hp->condition->parent);
            if (it == config.end() || !(it->second == hp->condition->value)) return false;
            hp = &at(hp->condition->parent);
        }
        return true;
    }

    /// Rejects out-of-domain values, unknown keys and values for inactive hyperparameters.
    void validate_config(const Config& config, const std::string& owner) const {
        for (const auto& [key, value] : config) {
            if (!contains(key))
                throw Error(ErrorKind::validation,
                            owner + ": config key '" + key + "' is not in the search space");
            const auto& hp = at(key);
            if (!hp.contains(value))
                throw Error(ErrorKind::validation, owner + ": value " + value_to_string(value) +
                                                       " outside the domain of hyperparameter '" +
                                                       key + "'");
            if (!is_active(key, config))
                throw Error(ErrorKind::validation,
                            owner + ": hyperparameter '" + key + "' is inactive but present");
        }
    }

private:
    void validate() const {
        for (const auto& hp : hps_) {
            if (hp.numeric()) {
                if (!(hp.lower < hp.upper))
                    throw Error(ErrorKind::validation,
                                "hyperparameter '" + hp.name + "': lower must be < upper");
                if (hp.log_scale && hp.lower <= 0.0)
                    throw Error(ErrorKind::validation,
                                "hyperparameter '" + hp.name + "': log scale needs lower > 0");
            } else if (hp.choices.empty()) {
                throw Error(ErrorKind::validation,
                            "hyperparameter '" + hp.name + "': categorical needs choices");
            }
            if (!hp.contains(hp.default_value))
                throw Error(ErrorKind::validation,
                            "hyperparameter '" + hp.name + "': default outside domain");
            if (hp.condition) {
                if (!contains(hp.condition->parent))
                    throw Error(ErrorKind::validation, "hyperparameter '" + hp.name +
                                                           "' conditioned on unknown '" +
                                                           hp.condition->parent + "'");
                if (!at(hp.condition->parent).contains(hp.condition->value))
                    throw Error(ErrorKind::validation,
                                "hyperparameter '" + hp.name + "': condition value outside parent domain");
            }
        }
        // condition graph must be a forest
        for (const auto& hp : hps_) {
            std::set<std::string> seen{hp.name};
            const Hyperparameter* cur = &hp;
            while (cur->condition) {
                if (!seen.insert(cur->condition->parent).second)
                    throw Error(ErrorKind::validation,
                                "cyclic condition involving '" + hp.name + "'");
                cur = &at(cur->condition->parent);
            }
        }
    }

    std::vector<Hyperparameter> hps_;
    std::map<std::string, std::size_t> index_;
    std::optional<json> structure_template_;
};

/// Fills every hyperparameter of `space` absent from `config` with its default.
inline Config pad_with_defaults(const Config& config, const SearchSpace& space) {
    Config out = config;
    for (const auto& hp : space.hyperparameters()) out.emplace(hp.name, hp.default_value);
    return out;
}

/// Union of search spaces. Colliding names keep the widest bounds and the union of choices
/// (first-seen order); kinds and conditions must agree.
inline SearchSpace merge_search_spaces(const std::vector<SearchSpace>& spaces) {
    if (spaces.empty()) throw Error(ErrorKind::contract, "merge_search_spaces needs at least one space");
    std::vector<Hyperparameter> merged;
    std::map<std::string, std::size_t> index;
    for (const auto& space : spaces) {
        for (const auto& hp : space.hyperparameters()) {
            auto it = index.find(hp.name);
            if (it == index.end()) {
                index.emplace(hp.name, merged.size());
                merged.push_back(hp);
                continue;
            }
            auto& into = merged[it->second];
            bool same_family = into.numeric() == hp.numeric();
            if (!same_family)
                throw Error(ErrorKind::merge, "hyperparameter '" + hp.name +
                                                  "' has incompatible kinds across search spaces");
            if (into.condition != hp.condition)
                throw Error(ErrorKind::merge, "hyperparameter '" + hp.name +
                                                  "' has conflicting conditions across search spaces");
            if (into.numeric()) {
                into.lower = std::min(into.lower, hp.lower);
                into.upper = std::max(into.upper, hp.upper);
                if (hp.kind == HpKind::continuous) into.kind = HpKind::continuous;
                into.log_scale = into.log_scale && hp.log_scale;
            } else {
                for (const auto& c : hp.choices)
                    if (into.choice_index(c) < 0) into.choices.push_back(c);
            }
        }
    }
    return SearchSpace(std::move(merged));
}

inline json to_json(const Hyperparameter& hp) {
    json j;
    j["name"] = hp.name;
    j["kind"] = to_string(hp.kind);
    if (hp.numeric()) {
        j["lower"] = hp.lower;
        j["upper"] = hp.upper;
        j["log_scale"] = hp.log_scale;
    } else {
        j["choices"] = hp.choices;
    }
    j["default"] = to_json(hp.default_value);
    if (hp.condition)
        j["condition"] = {{"parent", hp.condition->parent}, {"value", to_json(hp.condition->value)}};
    return j;
}

inline json to_json(const SearchSpace& space) {
    json j;
    j["hyperparameters"] = json::array();
    for (const auto& hp : space.hyperparameters()) j["hyperparameters"].push_back(to_json(hp));
    if (space.structure_template()) j["structure_template"] = *space.structure_template();
    return j;
}

inline json config_to_json(const Config& config) {
    json j = json::object();
    for (const auto& [k, v] : config) j[k] = to_json(v);
    return j;
}

}  // namespace runlens
