#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace svcevo {

enum class EntityKind { service, stakeholder };

std::string_view to_string(EntityKind kind);
std::optional<EntityKind> parse_entity_kind(std::string_view text);

struct Entity {
    std::string id;
    EntityKind kind = EntityKind::service;
};

/// Set of entities with unique ids, kept in file order.
class EntityRegistry {
public:
    /// Throws svcevo::Error on a duplicate id.
    void add(Entity entity);

    bool contains(std::string_view id) const;
    /// Throws svcevo::Error naming the id when it is unknown.
    const Entity& at(std::string_view id) const;

    std::size_t size() const { return entities_.size(); }
    bool empty() const { return entities_.empty(); }
    const std::vector<Entity>& entities() const { return entities_; }

private:
    std::vector<Entity> entities_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Reads a nodes CSV with header `id,type`.
EntityRegistry load_entities(const std::filesystem::path& path);
void save_entities(const EntityRegistry& registry, const std::filesystem::path& path);

} // namespace svcevo
