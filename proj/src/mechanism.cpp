#include "svcevo/mechanism.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <sstream>

namespace svcevo {

std::string_view to_string(Mechanism mechanism) {
    switch (mechanism) {
    case Mechanism::stability: return "stability";
    case Mechanism::aging: return "aging";
    case Mechanism::mutation: return "mutation";
    }
    return "?";
}

std::optional<Mechanism> parse_mechanism(std::string_view text) {
    if (text == "stability") return Mechanism::stability;
    if (text == "aging") return Mechanism::aging;
    if (text == "mutation") return Mechanism::mutation;
    return std::nullopt;
}

const RelationRule& MechanismConfig::rule_for(std::string_view relation) const {
    auto it = relations.find(std::string(relation));
    if (it != relations.end()) return it->second;
    if (fallback) return *fallback;
    throw Error("relation '" + std::string(relation) + "' has no mechanism entry and no '*' default");
}

void MechanismConfig::validate(const std::vector<InteractionEvent>& events) const {
    if (aging_period_days < 1) throw Error("aging_period_days must be >= 1");
    if (aging_max_days < aging_period_days) throw Error("aging_max_days must be >= aging_period_days");
    for (const auto& e : events) rule_for(e.relation);
}

MechanismConfig parse_mechanism_config(std::string_view text, const std::string& origin) {
    MechanismConfig config;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(origin, line_no, "expected 'key = value'");
        const std::string key{detail::trim(line.substr(0, eq))};
        const std::string value{detail::trim(line.substr(eq + 1))};
        if (key.empty()) throw ParseError(origin, line_no, "empty key");
        if (key == "aging_period_days" || key == "aging_max_days") {
            int days = 0;
            try {
                std::size_t used = 0;
                days = std::stoi(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
            } catch (const std::exception&) {
                throw ParseError(origin, line_no, key + " must be an integer");
            }
            (key == "aging_period_days" ? config.aging_period_days : config.aging_max_days) = days;
            continue;
        }
        std::istringstream fields(value);
        std::string name, impact_text, extra;
        fields >> name >> impact_text;
        if (name.empty() || impact_text.empty() || (fields >> extra))
            throw ParseError(origin, line_no, "expected '<mechanism> <impact>' for relation '" + key + "'");
        auto mechanism = parse_mechanism(name);
        if (!mechanism) throw ParseError(origin, line_no, "unknown mechanism '" + name + "'");
        RelationRule rule{*mechanism, detail::parse_real(impact_text, origin, line_no)};
        if (key == "*") {
            config.fallback = rule;
        } else if (!config.relations.emplace(key, rule).second) {
            throw ParseError(origin, line_no, "relation '" + key + "' listed twice");
        }
    }
    try {
        config.validate();
    } catch (const Error& e) {
        throw Error(origin + ": " + e.what());
    }
    return config;
}

MechanismConfig load_mechanism_config(const std::filesystem::path& path) {
    return parse_mechanism_config(detail::read_file(path), path.string());
}

std::string format_mechanism_config(const MechanismConfig& config) {
    std::ostringstream out;
    out << "aging_period_days = " << config.aging_period_days << '\n';
    out << "aging_max_days = " << config.aging_max_days << '\n';
    for (const auto& [relation, rule] : config.relations)
        out << relation << " = " << to_string(rule.mechanism) << ' ' << detail::format_exact(rule.impact) << '\n';
    if (config.fallback)
        out << "* = " << to_string(config.fallback->mechanism) << ' ' << detail::format_exact(config.fallback->impact)
            << '\n';
    return out.str();
}

} // namespace svcevo
