#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mgtta/harness.hpp"

namespace mgtta {

namespace pt = boost::property_tree;

namespace {

constexpr std::string_view kMethodPrefix = "method:";
constexpr std::string_view kConditionPrefix = "condition:";

template <typename T>
T get_value(const pt::ptree& node, const std::string& section, const std::string& key) {
  const auto v = node.get_value_optional<T>();
  if (!v) {
    throw Error(ErrorKind::config_invalid,
                "[" + section + "] " + key + ": cannot parse '" + node.data() + "'");
  }
  return *v;
}

bool get_bool(const pt::ptree& node, const std::string& section, const std::string& key) {
  const std::string& s = node.data();
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorKind::config_invalid, "[" + section + "] " + key + ": expected a boolean");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::string cleaned = text;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream in(cleaned);
  std::vector<std::uint64_t> seeds;
  std::string tok;
  while (in >> tok) {
    require(tok.find_first_not_of("0123456789") == std::string::npos, ErrorKind::config_invalid,
            "seed '" + tok + "' is not an unsigned integer");
    seeds.push_back(std::stoull(tok));
  }
  return seeds;
}

void apply_adapt_key(AdaptConfig& cfg, const std::string& section, const std::string& key,
                     const pt::ptree& node) {
  if (key == "lambda_g") cfg.lambda_g = get_value<double>(node, section, key);
  else if (key == "lambda_d") cfg.lambda_d = get_value<double>(node, section, key);
  else if (key == "lambda_c") cfg.lambda_c = get_value<double>(node, section, key);
  else if (key == "lambda_r") cfg.lambda_r = get_value<double>(node, section, key);
  else if (key == "tau") cfg.tau = get_value<double>(node, section, key);
  else if (key == "eta") cfg.eta = get_value<double>(node, section, key);
  else if (key == "mu") cfg.mu = get_value<double>(node, section, key);
  else if (key == "lr") cfg.lr = get_value<double>(node, section, key);
  else if (key == "steps") cfg.steps = get_value<int>(node, section, key);
  else if (key == "batch_size") cfg.batch_size = get_value<int>(node, section, key);
  else if (key == "mode") cfg.mode = parse_mode(node.data());
  else if (key == "conflict_direction") {
    if (node.data() == "toward_reliable") cfg.direction = ConflictDirection::toward_reliable;
    else if (node.data() == "inverted") cfg.direction = ConflictDirection::inverted;
    else throw Error(ErrorKind::config_invalid, "[" + section + "] conflict_direction: unknown value");
  } else {
    throw Error(ErrorKind::config_invalid, "[" + section + "] unknown key '" + key + "'");
  }
}

ShiftSpec parse_shift(const pt::ptree& sec, const std::string& section) {
  ShiftSpec s;
  for (const auto& [key, node] : sec) {
    if (key == "visual_severity") s.visual_severity = get_value<int>(node, section, key);
    else if (key == "textual_severity") s.textual_severity = get_value<int>(node, section, key);
    else if (key == "residual_scale") s.residual_scale = get_value<double>(node, section, key);
    else if (key == "conflicting") s.conflicting = get_bool(node, section, key);
    else if (key == "birkhoff_noise") s.birkhoff_noise = get_value<double>(node, section, key);
    else if (key == "birkhoff_perms") s.birkhoff_perms = get_value<std::size_t>(node, section, key);
    else throw Error(ErrorKind::config_invalid, "[" + section + "] unknown key '" + key + "'");
  }
  return s;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// Section headers in file order. The ini reader drops sections without keys,
// and an empty [method:NAME] or [condition:ID] is meaningful here.
std::vector<std::string> section_names(const std::string& text) {
  std::vector<std::string> names;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    const auto last = line.find_last_not_of(" \t\r");
    if (first == std::string::npos || line[first] != '[' || line[last] != ']') continue;
    names.push_back(line.substr(first + 1, last - first - 1));
  }
  return names;
}

}  // namespace

std::vector<MethodSpec> default_methods(const AdaptConfig& base) {
  std::vector<MethodSpec> out;
  for (AdaptMode m : {AdaptMode::source_only, AdaptMode::entropy_only, AdaptMode::entropy_div,
                      AdaptMode::mg_mtta}) {
    AdaptConfig c = base;
    c.mode = m;
    out.push_back({std::string(to_string(m)), c});
  }
  return out;
}

void ExperimentConfig::validate() const {
  stream.validate();
  require(!seeds.empty(), ErrorKind::config_invalid, "at least one explicit seed is required");
  require(!conditions.empty(), ErrorKind::config_invalid, "at least one shift condition is required");
  require(!methods.empty(), ErrorKind::config_invalid, "at least one method is required");
  std::set<std::string> ids;
  for (const auto& c : conditions) {
    require(!c.id.empty(), ErrorKind::config_invalid, "condition id must be nonempty");
    require(ids.insert(c.id).second, ErrorKind::config_invalid, "duplicate condition '" + c.id + "'");
    c.spec.validate();
  }
  std::set<std::string> names;
  for (const auto& m : methods) {
    require(!m.name.empty(), ErrorKind::config_invalid, "method name must be nonempty");
    require(names.insert(m.name).second, ErrorKind::config_invalid, "duplicate method '" + m.name + "'");
    m.cfg.validate();
  }
}

ExperimentConfig parse_config(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::config_invalid, e.what());
  }

  ExperimentConfig cfg;
  AdaptConfig base;
  // [adapt] first: method sections override it regardless of file order.
  if (const auto adapt = tree.get_child_optional("adapt")) {
    for (const auto& [key, node] : *adapt) {
      require(key != "mode", ErrorKind::config_invalid, "[adapt] mode belongs in a method section");
      apply_adapt_key(base, "adapt", key, node);
    }
  }

  bool any_method = false;
  const pt::ptree empty;
  for (const std::string& section : section_names(text)) {
    const auto found = tree.find(section);
    const pt::ptree& sec = found == tree.not_found() ? empty : found->second;
    if (section == "adapt") continue;
    if (section == "stream") {
      for (const auto& [key, node] : sec) {
        if (key == "k") cfg.stream.k = get_value<std::size_t>(node, section, key);
        else if (key == "n") cfg.stream.n = get_value<std::size_t>(node, section, key);
        else if (key == "beta_star") cfg.stream.beta_star = get_value<double>(node, section, key);
        else if (key == "gamma_min") cfg.stream.gamma_min = get_value<double>(node, section, key);
        else if (key == "signal") cfg.stream.signal = get_value<double>(node, section, key);
        else if (key == "shared_noise") cfg.stream.shared_noise = get_value<double>(node, section, key);
        else if (key == "modality_noise") cfg.stream.modality_noise = get_value<double>(node, section, key);
        else if (key == "max_attempts") cfg.stream.max_attempts = get_value<int>(node, section, key);
        else if (key == "seeds") cfg.seeds = parse_seeds(node.data());
        else throw Error(ErrorKind::config_invalid, "[stream] unknown key '" + key + "'");
      }
    } else if (section == "output") {
      for (const auto& [key, node] : sec) {
        if (key == "path") {
          cfg.out_path = node.data();
        } else if (key == "format") {
          if (node.data() == "table") cfg.format = ReportFormat::table;
          else if (node.data() == "records") cfg.format = ReportFormat::records;
          else throw Error(ErrorKind::config_invalid, "[output] format must be table or records");
        } else {
          throw Error(ErrorKind::config_invalid, "[output] unknown key '" + key + "'");
        }
      }
    } else if (section.starts_with(kMethodPrefix)) {
      MethodSpec m{section.substr(kMethodPrefix.size()), base};
      bool explicit_mode = false;
      for (const auto& [key, node] : sec) {
        apply_adapt_key(m.cfg, section, key, node);
        explicit_mode = explicit_mode || key == "mode";
      }
      if (!explicit_mode) m.cfg.mode = parse_mode(m.name);
      cfg.methods.push_back(std::move(m));
      any_method = true;
    } else if (section.starts_with(kConditionPrefix)) {
      cfg.conditions.push_back({section.substr(kConditionPrefix.size()), parse_shift(sec, section)});
    } else {
      throw Error(ErrorKind::config_invalid, "unknown section [" + section + "]");
    }
  }
  if (!any_method) cfg.methods = default_methods(base);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open config '" + path + "'");
  return parse_config(in);
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto& s = cfg.stream;
  os << "[stream]\n"
     << "k = " << s.k << "\n"
     << "n = " << s.n << "\n"
     << "beta_star = " << fmt(s.beta_star) << "\n"
     << "gamma_min = " << fmt(s.gamma_min) << "\n"
     << "signal = " << fmt(s.signal) << "\n"
     << "shared_noise = " << fmt(s.shared_noise) << "\n"
     << "modality_noise = " << fmt(s.modality_noise) << "\n"
     << "max_attempts = " << s.max_attempts << "\n"
     << "seeds =";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? ", " : " ") << cfg.seeds[i];
  os << "\n";

  auto methods = cfg.methods;
  std::sort(methods.begin(), methods.end(),
            [](const MethodSpec& a, const MethodSpec& b) { return a.name < b.name; });
  for (const auto& m : methods) {
    const auto& c = m.cfg;
    os << "\n[method:" << m.name << "]\n"
       << "mode = " << to_string(c.mode) << "\n"
       << "lambda_g = " << fmt(c.lambda_g) << "\n"
       << "lambda_d = " << fmt(c.lambda_d) << "\n"
       << "lambda_c = " << fmt(c.lambda_c) << "\n"
       << "lambda_r = " << fmt(c.lambda_r) << "\n"
       << "tau = " << fmt(c.tau) << "\n"
       << "eta = " << fmt(c.eta) << "\n"
       << "mu = " << fmt(c.mu) << "\n"
       << "lr = " << fmt(c.lr) << "\n"
       << "steps = " << c.steps << "\n"
       << "batch_size = " << c.batch_size << "\n"
       << "conflict_direction = "
       << (c.direction == ConflictDirection::inverted ? "inverted" : "toward_reliable") << "\n";
  }

  auto conditions = cfg.conditions;
  std::sort(conditions.begin(), conditions.end(),
            [](const Condition& a, const Condition& b) { return a.id < b.id; });
  for (const auto& c : conditions) {
    const auto& sp = c.spec;
    os << "\n[condition:" << c.id << "]\n"
       << "visual_severity = " << sp.visual_severity << "\n"
       << "textual_severity = " << sp.textual_severity << "\n"
       << "residual_scale = " << fmt(sp.residual_scale) << "\n"
       << "conflicting = " << (sp.conflicting ? "true" : "false") << "\n"
       << "birkhoff_noise = " << fmt(sp.birkhoff_noise) << "\n"
       << "birkhoff_perms = " << sp.birkhoff_perms << "\n";
  }
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_config(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace mgtta
