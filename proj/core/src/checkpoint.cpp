#include "dgwm/checkpoint.hpp"

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dgwm/errors.hpp"

namespace dgwm {

namespace {

constexpr char kMagic[] = "DGWMCKPT1\n";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string config_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "input_dim=" << c.input_dim << "\n";
  os << "feature_dim=" << c.feature_dim << "\n";
  os << "num_classes=" << c.num_classes << "\n";
  os << "latent_dim=" << c.latent_dim << "\n";
  os << "hidden=";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    if (i) os << ",";
    os << c.hidden[i];
  }
  os << "\n";
  os << "epsilon_sq=" << format_double(c.epsilon_sq) << "\n";
  os << "noise_mode=" << to_string(c.noise_mode) << "\n";
  os << "aggregation=" << to_string(c.aggregation) << "\n";
  os << "detach_domain_info=" << (c.detach_domain_info ? 1 : 0) << "\n";
  os << "mask_variant=" << to_string(c.mask_variant) << "\n";
  os << "separate_classifiers=" << (c.separate_classifiers ? 1 : 0) << "\n";
  os << "num_classifiers=" << c.num_classifiers << "\n";
  return os.str();
}

ModelConfig parse_config_text(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError("checkpoint: malformed config line: " + line);
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "input_dim") c.input_dim = std::stoi(val);
    else if (key == "feature_dim") c.feature_dim = std::stoi(val);
    else if (key == "num_classes") c.num_classes = std::stoi(val);
    else if (key == "latent_dim") c.latent_dim = std::stoi(val);
    else if (key == "hidden") {
      c.hidden.clear();
      std::istringstream hs(val);
      std::string tok;
      while (std::getline(hs, tok, ',')) {
        if (!tok.empty()) c.hidden.push_back(std::stoi(tok));
      }
    } else if (key == "epsilon_sq") c.epsilon_sq = std::stod(val);
    else if (key == "noise_mode") c.noise_mode = parse_noise_mode(val);
    else if (key == "aggregation") c.aggregation = parse_aggregation(val);
    else if (key == "detach_domain_info") c.detach_domain_info = val == "1";
    else if (key == "mask_variant") c.mask_variant = parse_mask_variant(val);
    else if (key == "separate_classifiers") c.separate_classifiers = val == "1";
    else if (key == "num_classifiers") c.num_classifiers = std::stoi(val);
    else throw IoError("checkpoint: unknown config key: " + key);
  }
  return c;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open for write: " + path);
  out.write(kMagic, sizeof(kMagic) - 1);
  const std::string cfg = config_text(bundle.cfg);
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const auto params = bundle.named_params();
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = t.shape();
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (int dim : shape) write_u32(out, static_cast<std::uint32_t>(dim));
    const auto& vals = t.value();
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed: " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open: " + path);
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t cfg_len = read_u32(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  if (!in) throw IoError("checkpoint: truncated config");
  const ModelConfig cfg = parse_config_text(cfg_text);
  Rng scratch(0);
  ModelBundle bundle = ModelBundle::init(cfg, scratch);
  auto params = bundle.named_params();
  const std::uint32_t count = read_u32(in);
  if (count != params.size()) {
    throw IoError("checkpoint: parameter count mismatch");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t ndims = read_u32(in);
    Shape shape(ndims);
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < ndims; ++k) {
      shape[k] = static_cast<int>(read_u32(in));
      numel *= static_cast<std::size_t>(shape[k]);
    }
    std::vector<double> vals(numel);
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated tensor data");
    if (params[i].first != name || params[i].second.shape() != shape) {
      throw IoError("checkpoint: layout mismatch at tensor " + name);
    }
    params[i].second.set_value(vals);
  }
  return bundle;
}

}  // namespace dgwm
