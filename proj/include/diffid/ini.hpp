#pragma once

#include <map>
#include <string>

namespace diffid {

/// section -> key -> value. Keys before the first "[section]" header land
/// in the "" section. '#' and ';' start comment lines.
using IniDocument = std::map<std::string, std::map<std::string, std::string>>;

IniDocument parse_ini(const std::string& text);
std::string format_ini(const IniDocument& doc);

}  // namespace diffid
