#include "svcevo/events.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <algorithm>

namespace svcevo {

std::vector<InteractionEvent> load_events(const std::filesystem::path& path, const EntityRegistry& registry) {
    auto in = detail::open_input(path);
    const std::string file = path.string();
    std::vector<InteractionEvent> events;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv(line);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"source", "target", "relation", "timestamp"})
                throw ParseError(file, line_no, "expected header 'source,target,relation,timestamp'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) throw ParseError(file, line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        for (int i = 0; i < 2; ++i)
            if (!registry.contains(fields[i]))
                throw ParseError(file, line_no, "unknown entity id '" + fields[i] + "'");
        if (fields[0] == fields[1]) throw ParseError(file, line_no, "self-interaction on '" + fields[0] + "'");
        if (fields[2].empty()) throw ParseError(file, line_no, "empty relation");
        Instant t;
        try {
            t = parse_instant(fields[3]);
        } catch (const Error& e) {
            throw ParseError(file, line_no, e.what());
        }
        events.push_back(InteractionEvent{fields[0], fields[1], fields[2], t});
    }
    if (!header_seen) throw ParseError(file, line_no, "missing header 'source,target,relation,timestamp'");
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return events;
}

void save_events(const std::vector<InteractionEvent>& events, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "source,target,relation,timestamp\n";
    for (const auto& e : events)
        out << e.source << ',' << e.target << ',' << e.relation << ',' << format_instant(e.timestamp) << '\n';
}

} // namespace svcevo
