#include "svcevo/entity.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

namespace svcevo {

std::string_view to_string(EntityKind kind) {
    return kind == EntityKind::service ? "service" : "stakeholder";
}

std::optional<EntityKind> parse_entity_kind(std::string_view text) {
    if (text == "service") return EntityKind::service;
    if (text == "stakeholder") return EntityKind::stakeholder;
    return std::nullopt;
}

void EntityRegistry::add(Entity entity) {
    if (entity.id.empty()) throw Error("empty entity id");
    auto [it, inserted] = index_.emplace(entity.id, entities_.size());
    if (!inserted) throw Error("duplicate entity id '" + entity.id + "'");
    entities_.push_back(std::move(entity));
}

bool EntityRegistry::contains(std::string_view id) const {
    return index_.contains(std::string(id));
}

const Entity& EntityRegistry::at(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw Error("unknown entity id '" + std::string(id) + "'");
    return entities_[it->second];
}

EntityRegistry load_entities(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    const std::string file = path.string();
    EntityRegistry registry;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv(line);
        if (!header_seen) {
            if (fields.size() != 2 || fields[0] != "id" || fields[1] != "type")
                throw ParseError(file, line_no, "expected header 'id,type'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 2) throw ParseError(file, line_no, "expected 2 fields, got " + std::to_string(fields.size()));
        auto kind = parse_entity_kind(fields[1]);
        if (!kind) throw ParseError(file, line_no, "unknown entity type '" + fields[1] + "'");
        try {
            registry.add(Entity{fields[0], *kind});
        } catch (const Error& e) {
            throw ParseError(file, line_no, e.what());
        }
    }
    if (!header_seen) throw ParseError(file, line_no, "missing header 'id,type'");
    return registry;
}

void save_entities(const EntityRegistry& registry, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "id,type\n";
    for (const auto& e : registry.entities()) out << e.id << ',' << to_string(e.kind) << '\n';
}

} // namespace svcevo
