#pragma once

#include "svcevo/entity.hpp"
#include "svcevo/time.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace svcevo {

/// One timestamped, typed interaction between two distinct entities.
struct InteractionEvent {
    std::string source;
    std::string target;
    std::string relation;
    Instant timestamp;
};

/// Reads an events CSV (`source,target,relation,timestamp`) and returns the
/// events stably sorted by timestamp. Every id must be in `registry`.
std::vector<InteractionEvent> load_events(const std::filesystem::path& path,
                                          const EntityRegistry& registry);

void save_events(const std::vector<InteractionEvent>& events, const std::filesystem::path& path);

} // namespace svcevo
