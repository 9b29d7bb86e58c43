#pragma once

#include <iosfwd>
#include <string>

#include "popsim/engine.hpp"

namespace popsim {

/// Line-oriented trace format, deterministic byte-for-byte:
///
///   popsim-trace v1
///   protocol <name>
///   model <name>
///   n <n>
///   seed <seed>
///   sim <simulator description>
///   init <agent> <agent> ...
///   step <idx> <starter> <reactor> <om> ev=<a>:<pre>:<post>:<tag>[,...] post=<agent> ...
///
/// with om one of - s r b, and ev=- when a step carries no events.
void write_trace(std::ostream& out, const Trace& t);
std::string format_trace(const Trace& t);
void save_trace_file(const std::string& path, const Trace& t);

Trace read_trace(std::istream& in);
Trace parse_trace(const std::string& text);
Trace load_trace_file(const std::string& path);

}  // namespace popsim
