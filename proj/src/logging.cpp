#include "fewmol/logging.hpp"

namespace fewmol::logging {

namespace {
Level g_level = Level::Warn;
}

Level level() { return g_level; }
void set_level(Level lv) { g_level = lv; }

void info(const std::string& msg) {
    if (g_level <= Level::Info) std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

void warn(const std::string& msg) {
    if (g_level <= Level::Warn) std::fprintf(stderr, "[warn] %s\n", msg.c_str());
}

}  // namespace fewmol::logging
