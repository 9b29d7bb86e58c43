#include "popsim/trace_io.hpp"

#include <fstream>
#include <sstream>

namespace popsim {

namespace {

void write_events(std::ostream& out, const std::vector<Event>& events) {
  if (events.empty()) {
    out << "ev=-";
    return;
  }
  out << "ev=";
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i) out << ',';
    const Event& e = events[i];
    out << e.agent << ':' << e.pre << ':' << e.post << ':' << e.tag;
  }
}

}  // namespace

void write_trace(std::ostream& out, const Trace& t) {
  out << "popsim-trace v1\n";
  out << "protocol " << t.header.protocol << "\n";
  out << "model " << t.header.model << "\n";
  out << "n " << t.header.n << "\n";
  out << "seed " << t.header.seed << "\n";
  out << "sim " << t.header.simulator << "\n";
  out << "init";
  for (const AgentState& a : t.initial) out << ' ' << format_agent(a);
  out << "\n";
  for (const TraceRecord& rec : t.records) {
    out << "step " << rec.index << ' ' << rec.step.starter << ' ' << rec.step.reactor
        << ' ' << omission_code(rec.step.omission) << ' ';
    write_events(out, rec.events);
    out << " post=";
    for (std::size_t i = 0; i < rec.post.size(); ++i) {
      if (i) out << ' ';
      out << format_agent(rec.post[i]);
    }
    out << "\n";
  }
}

std::string format_trace(const Trace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

void save_trace_file(const std::string& path, const Trace& t) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  write_trace(out, t);
  if (!out) throw ParseError("failed while writing '" + path + "'");
}

namespace {

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t parse_i64(const std::string& text, int lineno, const char* what) {
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("trace line " + std::to_string(lineno) + ": bad " + what + " '" +
                     text + "'");
  }
}

Event parse_event(const std::string& text, int lineno) {
  // <agent>:<pre>:<post>:<tag>; states are colon-free, the tag is not.
  auto first = text.find(':');
  auto second = first == std::string::npos ? first : text.find(':', first + 1);
  auto third = second == std::string::npos ? second : text.find(':', second + 1);
  if (third == std::string::npos)
    throw ParseError("trace line " + std::to_string(lineno) + ": bad event '" + text +
                     "'");
  Event e;
  e.agent = static_cast<int>(parse_i64(text.substr(0, first), lineno, "event agent"));
  e.pre = text.substr(first + 1, second - first - 1);
  e.post = text.substr(second + 1, third - second - 1);
  e.tag = text.substr(third + 1);
  if (e.pre.empty() || e.post.empty() || e.tag.empty())
    throw ParseError("trace line " + std::to_string(lineno) + ": bad event '" + text +
                     "'");
  return e;
}

}  // namespace

Trace read_trace(std::istream& in) {
  Trace t;
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line) || line != "popsim-trace v1")
    throw ParseError("not a popsim trace: missing version line");
  ++lineno;

  bool saw_init = false;
  std::int64_t expected_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ParseError("trace line " + std::to_string(lineno) + ": " + why);
    };
    auto words = split_words(line);
    if (words.empty()) continue;
    const std::string& kw = words[0];

    if (kw == "protocol") {
      if (words.size() != 2) fail("expected: protocol <name>");
      t.header.protocol = words[1];
    } else if (kw == "model") {
      if (words.size() != 2) fail("expected: model <name>");
      t.header.model = words[1];
    } else if (kw == "n") {
      if (words.size() != 2) fail("expected: n <count>");
      t.header.n = static_cast<int>(parse_i64(words[1], lineno, "population size"));
    } else if (kw == "seed") {
      if (words.size() != 2) fail("expected: seed <seed>");
      t.header.seed = static_cast<std::uint64_t>(
          parse_i64(words[1], lineno, "seed"));
    } else if (kw == "sim") {
      if (words.size() != 2) fail("expected: sim <description>");
      t.header.simulator = words[1];
    } else if (kw == "init") {
      if (saw_init) fail("second init line");
      for (std::size_t i = 1; i < words.size(); ++i)
        t.initial.push_back(parse_agent(words[i]));
      saw_init = true;
    } else if (kw == "step") {
      if (!saw_init) fail("step before init");
      if (words.size() < 7) fail("short step line");
      TraceRecord rec;
      rec.index = parse_i64(words[1], lineno, "step index");
      if (rec.index != expected_index) fail("step index out of order");
      ++expected_index;
      rec.step.starter = static_cast<int>(parse_i64(words[2], lineno, "starter"));
      rec.step.reactor = static_cast<int>(parse_i64(words[3], lineno, "reactor"));
      if (words[4].size() != 1) fail("bad omission code '" + words[4] + "'");
      rec.step.omission = omission_from_code(words[4][0]);
      if (words[5].substr(0, 3) != "ev=") fail("missing event list");
      std::string ev = words[5].substr(3);
      if (ev != "-") {
        for (const std::string& item : split_on(ev, ','))
          rec.events.push_back(parse_event(item, lineno));
      }
      if (words[6].substr(0, 5) != "post=") fail("missing post configuration");
      rec.post.push_back(parse_agent(words[6].substr(5)));
      for (std::size_t i = 7; i < words.size(); ++i)
        rec.post.push_back(parse_agent(words[i]));
      if (rec.post.size() != t.initial.size())
        fail("post configuration arity differs from init");
      t.records.push_back(std::move(rec));
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }

  if (!saw_init) throw ParseError("trace has no init line");
  if (t.header.n != static_cast<int>(t.initial.size()))
    throw ParseError("trace header n differs from the init line");
  return t;
}

Trace parse_trace(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in);
}

Trace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file '" + path + "'");
  return read_trace(in);
}

}  // namespace popsim
