#pragma once

#include "svcevo/events.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svcevo {

/// How one relation type contributes to an edge weight over time.
enum class Mechanism { stability, aging, mutation };

std::string_view to_string(Mechanism mechanism);
std::optional<Mechanism> parse_mechanism(std::string_view text);

struct RelationRule {
    Mechanism mechanism = Mechanism::stability;
    double impact = 0.0;

    friend bool operator==(const RelationRule&, const RelationRule&) = default;
};

/// Relation table plus the two aging parameters.
///
/// File format, one `key = value` per line, `#` starts a comment:
///
///     aging_period_days = 30
///     aging_max_days = 365
///     cooperation = stability 1.0
///     rumour = aging 0.5
///     acquisition = mutation 3
///     * = stability 1.0        # default for unlisted relations
struct MechanismConfig {
    std::map<std::string, RelationRule> relations;
    std::optional<RelationRule> fallback;
    int aging_period_days = 30;
    int aging_max_days = 365;

    /// Rule for `relation`, the `*` entry when unlisted, otherwise throws.
    const RelationRule& rule_for(std::string_view relation) const;

    /// Checks a ≥ 1, b ≥ a and that every relation in `events` resolves.
    void validate(const std::vector<InteractionEvent>& events = {}) const;
};

MechanismConfig load_mechanism_config(const std::filesystem::path& path);
MechanismConfig parse_mechanism_config(std::string_view text, const std::string& origin = "<config>");
std::string format_mechanism_config(const MechanismConfig& config);

} // namespace svcevo
