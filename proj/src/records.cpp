#include "mgtta/records.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

namespace mgtta {

using nlohmann::json;

namespace {

json spec_json(const ShiftSpec& s) {
  return {{"visual_severity", s.visual_severity},
          {"textual_severity", s.textual_severity},
          {"residual_scale", s.residual_scale},
          {"conflicting", s.conflicting},
          {"birkhoff_noise", s.birkhoff_noise},
          {"birkhoff_perms", s.birkhoff_perms}};
}

ShiftSpec spec_from(const json& j) {
  ShiftSpec s;
  s.visual_severity = j.at("visual_severity").get<int>();
  s.textual_severity = j.at("textual_severity").get<int>();
  s.residual_scale = j.at("residual_scale").get<double>();
  s.conflicting = j.at("conflicting").get<bool>();
  s.birkhoff_noise = j.at("birkhoff_noise").get<double>();
  s.birkhoff_perms = j.at("birkhoff_perms").get<std::size_t>();
  return s;
}

Posterior posterior_from(const json& j) { return Posterior(j.get<std::vector<double>>()); }

}  // namespace

std::string stream_record_line(const StreamRecord& r) {
  const auto& c = r.sample.clean;
  const json j = {{"index", r.index},
                  {"label", c.label},
                  {"beta_star", c.beta_star},
                  {"gamma", c.gamma},
                  {"pi_v", c.pi_v.vec()},
                  {"pi_t", c.pi_t.vec()},
                  {"pi_f", c.pi_f.vec()},
                  {"p_v", r.sample.p_v.vec()},
                  {"p_t", r.sample.p_t.vec()},
                  {"spec", spec_json(r.spec)}};
  return j.dump();
}

StreamRecord parse_stream_record(const std::string& line) {
  try {
    const json j = json::parse(line);
    StreamRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.spec = spec_from(j.at("spec"));
    CleanSample& c = r.sample.clean;
    c.pi_v = posterior_from(j.at("pi_v"));
    c.pi_t = posterior_from(j.at("pi_t"));
    c.pi_f = posterior_from(j.at("pi_f"));
    c.beta_star = j.at("beta_star").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.label = j.at("label").get<std::size_t>();
    r.sample.p_v = posterior_from(j.at("p_v"));
    r.sample.p_t = posterior_from(j.at("p_t"));
    r.sample.z_v = log_probs(r.sample.p_v);
    r.sample.z_t = log_probs(r.sample.p_t);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, std::string("bad stream record: ") + e.what());
  }
}

void write_stream(std::ostream& out, const std::vector<StreamSample>& samples, const ShiftSpec& spec) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << stream_record_line({i, spec, samples[i]}) << '\n';
  }
}

std::vector<StreamRecord> read_stream(std::istream& in) {
  std::vector<StreamRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_stream_record(line));
  }
  return out;
}

}  // namespace mgtta
