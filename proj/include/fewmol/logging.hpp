#pragma once

#include <cstdio>
#include <string>

namespace fewmol::logging {

enum class Level { Info = 0, Warn = 1, Silent = 2 };

Level level();
void set_level(Level lv);

void info(const std::string& msg);
void warn(const std::string& msg);

}  // namespace fewmol::logging
