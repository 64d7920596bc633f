#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <regex>
#include <sstream>

#include "tilecast/errors.hpp"
#include "tilecast/stream_harness.hpp"

namespace tilecast::harness {
namespace {

namespace pt = boost::property_tree;

template <typename T>
T number(const std::string& section, const std::string& key, const std::string& text) {
  T value{};
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw ConfigError("[" + section + "] " + key + ": '" + text + "' is not a valid number");
  return value;
}

std::uint16_t port_value(const std::string& section, const std::string& key, const std::string& text) {
  const long v = number<long>(section, key, text);
  if (v < 0 || v > 65535) throw ConfigError("[" + section + "] " + key + ": port out of range");
  return static_cast<std::uint16_t>(v);
}

bool bool_value(const std::string& section, const std::string& key, const std::string& text) {
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  throw ConfigError("[" + section + "] " + key + ": expected true or false");
}

// Calls on_key(key, value) for every entry and rejects keys outside `allowed`.
template <typename F>
void each_key(const std::string& section, const pt::ptree& tree, const std::set<std::string>& allowed, F&& on_key) {
  for (const auto& [key, node] : tree) {
    if (!allowed.contains(key)) throw ConfigError("[" + section + "]: unknown key '" + key + "'");
    on_key(key, node.template get_value<std::string>());
  }
}

}  // namespace

void HarnessConfig::validate() const {
  canvas.validate();
  if (quant_step < 1 || quant_step > 255) throw ConfigError("[canvas] quant_step must be in 1..255");
  if (canvas.width > 65535 || canvas.height > 65535) throw ConfigError("[canvas] dimensions too large");
  if (user.empty() || password.empty()) throw ConfigError("[credentials] user and password must not be empty");
  for (const std::string* field : {&user, &password})
    if (field->find_first_of(":@/ \t") != std::string::npos)
      throw ConfigError("[credentials] user and password must not contain ':', '@', '/' or whitespace");
  if (rtp_port % 2 != 0) throw ConfigError("[server] rtp_port must be even");
  if (stream_path.empty() || stream_path.front() != '/') throw ConfigError("[server] stream_path must start with '/'");
  if (!(call_timeout_s > 0)) throw ConfigError("[signaling] call_timeout_s must be positive");
  if (!(heartbeat_interval_s > 0)) throw ConfigError("[signaling] heartbeat_interval_s must be positive");
  if (stale_after_beats < 1) throw ConfigError("[signaling] stale_after_beats must be at least 1");
  if (maximize_tile && *maximize_tile < 0) throw ConfigError("[canvas] maximize_tile must be non-negative");
}

HarnessConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // read_ini drops sections without keys, so take the section list from the
  // headers themselves; an all-defaults [source:x] must still declare a source.
  std::vector<std::string> sections;
  for (const auto& [name, body] : tree)
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + name + "' outside a section");
  {
    static const std::regex header(R"(^\s*\[\s*([^\]]*?)\s*\]\s*$)");
    std::istringstream in(ini_text);
    std::smatch m;
    for (std::string line; std::getline(in, line);)
      if (std::regex_match(line, m, header)) sections.push_back(m[1].str());
  }

  HarnessConfig c;
  const pt::ptree empty;
  for (const auto& section : sections) {
    const auto child = tree.get_child_optional(pt::ptree::path_type(section, '\0'));
    const pt::ptree& body = child ? *child : empty;
    if (section == "server") {
      each_key(section, body,
               {"bind", "public_host", "rtsp_port", "rtp_port", "http_port", "ws_port", "data_dir", "stream_path"},
               [&](const std::string& k, const std::string& v) {
                 if (k == "bind") c.bind_host = v;
                 else if (k == "public_host") c.public_host = v;
                 else if (k == "rtsp_port") c.rtsp_port = port_value(section, k, v);
                 else if (k == "rtp_port") c.rtp_port = port_value(section, k, v);
                 else if (k == "http_port") c.http_port = port_value(section, k, v);
                 else if (k == "ws_port") c.ws_port = port_value(section, k, v);
                 else if (k == "data_dir") c.data_dir = v;
                 else c.stream_path = v;
               });
    } else if (section == "credentials") {
      each_key(section, body, {"user", "password"}, [&](const std::string& k, const std::string& v) {
        (k == "user" ? c.user : c.password) = v;
      });
    } else if (section == "canvas") {
      each_key(section, body, {"width", "height", "fps", "rows", "cols", "quant_step", "sample_hidden_pages", "maximize_tile",
                                 "capture_threads"},
               [&](const std::string& k, const std::string& v) {
                 if (k == "width") c.canvas.width = number<int>(section, k, v);
                 else if (k == "height") c.canvas.height = number<int>(section, k, v);
                 else if (k == "fps") c.canvas.fps = number<double>(section, k, v);
                 else if (k == "rows") c.canvas.rows = number<int>(section, k, v);
                 else if (k == "cols") c.canvas.cols = number<int>(section, k, v);
                 else if (k == "quant_step") c.quant_step = number<int>(section, k, v);
                 else if (k == "sample_hidden_pages") c.canvas.sample_hidden_pages = bool_value(section, k, v);
                 else if (k == "capture_threads") c.capture_threads = bool_value(section, k, v);
                 else c.maximize_tile = number<int>(section, k, v);
               });
    } else if (section == "signaling") {
      each_key(section, body, {"call_timeout_s", "heartbeat_interval_s", "stale_after_beats"},
               [&](const std::string& k, const std::string& v) {
                 if (k == "call_timeout_s") c.call_timeout_s = number<double>(section, k, v);
                 else if (k == "heartbeat_interval_s") c.heartbeat_interval_s = number<double>(section, k, v);
                 else c.stale_after_beats = number<int>(section, k, v);
               });
    } else if (section.rfind("source:", 0) == 0 && section.size() > 7) {
      DeclaredSource d;
      d.name = section.substr(7);
      each_key(section, body, {"kind", "width", "height", "fps", "path", "loop", "virtual"},
               [&](const std::string& k, const std::string& v) {
                 if (k == "kind") {
                   if (v == "pattern") d.kind = SourceKind::pattern;
                   else if (v == "file") d.kind = SourceKind::file;
                   else throw ConfigError("[" + section + "] kind must be pattern or file");
                 } else if (k == "width") d.width = number<int>(section, k, v);
                 else if (k == "height") d.height = number<int>(section, k, v);
                 else if (k == "fps") d.fps = number<double>(section, k, v);
                 else if (k == "path") d.path = v;
                 else if (k == "loop") d.loop = bool_value(section, k, v);
                 else d.is_virtual = bool_value(section, k, v);
               });
      if (d.kind == SourceKind::file && d.path.empty()) throw ConfigError("[" + section + "] file sources need a path");
      c.sources.push_back(std::move(d));
    } else {
      throw ConfigError("config: unknown section [" + section + "]");
    }
  }
  c.validate();
  return c;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  HarnessConfig c = parse_config(text.str());
  // Relative paths in the file are relative to the file.
  const auto base = path.parent_path();
  if (c.data_dir.is_relative()) c.data_dir = base / c.data_dir;
  for (auto& s : c.sources)
    if (s.kind == SourceKind::file && s.path.is_relative()) s.path = base / s.path;
  return c;
}

std::vector<DeclaredSource> pattern_sources(int count, int width, int height, double fps) {
  std::vector<DeclaredSource> out;
  for (int i = 0; i < count; ++i) {
    DeclaredSource d;
    d.name = "pattern-" + std::to_string(i);
    d.width = width;
    d.height = height;
    d.fps = fps;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace tilecast::harness
