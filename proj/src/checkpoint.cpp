#include "pfn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "pfn/error.hpp"

namespace pfn {

namespace {

constexpr char kMagic[8] = {'P', 'F', 'N', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("checkpoint: truncated file");
  return v;
}

std::string spec_header(const ModelSpec& s, size_t edges, size_t params) {
  std::ostringstream os;
  os << "backbone=" << backbone_name(s.backbone) << "\n"
     << "input_dim=" << s.input_dim << "\n"
     << "width=" << s.width << "\n"
     << "layers=" << s.layers << "\n"
     << "ffn_dim=" << s.ffn_dim << "\n"
     << "kernel_size=" << s.kernel_size << "\n"
     << "attention=" << attention_name(s.attention.kind) << "\n"
     << "heads=" << s.attention.heads << "\n"
     << "tie_qk=" << (s.attention.tie_qk ? 1 : 0) << "\n"
     << "gamma_init=" << s.attention.gamma_init << "\n"
     << "phi_x=" << encoder_name(s.phi_x) << "\n"
     << "phi_y=" << encoder_name(s.phi_y) << "\n"
     << "head=" << head_name(s.head) << "\n"
     << "bucket_count=" << s.bucket_count << "\n"
     << "edges=" << edges << "\n"
     << "params=" << params << "\n";
  return os.str();
}

std::map<std::string, std::string> parse_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("checkpoint: malformed header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv,
                        const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("checkpoint: missing header key " + key);
  return it->second;
}

}  // namespace

void save_checkpoint(const std::string& path, const PFNModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ParseError("checkpoint: cannot open " + path + " for write");
  std::string header = spec_header(model.spec, model.buckets.edges.size(),
                                   model.params.size());
  os.write(kMagic, sizeof(kMagic));
  put<uint32_t>(os, static_cast<uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double e : model.buckets.edges) put(os, e);
  for (const auto& [name, t] : model.params) {
    put<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint8_t>(os, static_cast<uint8_t>(t.shape.size()));
    for (int64_t d : t.shape) put(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(sizeof(double) * t.data.size()));
  }
  if (!os) throw ParseError("checkpoint: write failed for " + path);
}

PFNModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  uint32_t hlen = get<uint32_t>(is);
  std::string header(hlen, '\0');
  is.read(header.data(), hlen);
  if (!is) throw ParseError("checkpoint: truncated header");
  auto kv = parse_header(header);

  PFNModel m;
  ModelSpec& s = m.spec;
  s.backbone = parse_backbone(need(kv, "backbone"));
  s.input_dim = std::stoll(need(kv, "input_dim"));
  s.width = std::stoll(need(kv, "width"));
  s.layers = std::stoll(need(kv, "layers"));
  s.ffn_dim = std::stoll(need(kv, "ffn_dim"));
  s.kernel_size = std::stoll(need(kv, "kernel_size"));
  s.attention.kind = parse_attention(need(kv, "attention"));
  s.attention.heads = std::stoll(need(kv, "heads"));
  s.attention.tie_qk = need(kv, "tie_qk") == "1";
  s.attention.gamma_init = std::stod(need(kv, "gamma_init"));
  s.attention.d_k = s.width;
  s.attention.d_v = s.width;
  s.phi_x = parse_encoder(need(kv, "phi_x"));
  s.phi_y = parse_encoder(need(kv, "phi_y"));
  s.head = parse_head(need(kv, "head"));
  s.bucket_count = std::stoll(need(kv, "bucket_count"));

  size_t n_edges = std::stoull(need(kv, "edges"));
  size_t n_params = std::stoull(need(kv, "params"));
  m.buckets.edges.resize(n_edges);
  for (size_t i = 0; i < n_edges; ++i) m.buckets.edges[i] = get<double>(is);

  for (size_t p = 0; p < n_params; ++p) {
    uint16_t nlen = get<uint16_t>(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    if (!is) throw ParseError("checkpoint: truncated parameter name");
    uint8_t ndim = get<uint8_t>(is);
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      shape[d] = get<int64_t>(is);
      if (shape[d] < 0) throw ParseError("checkpoint: negative dimension");
      numel *= shape[d];
    }
    Tensor t = ndim == 0 ? Tensor::scalar(0.0) : Tensor::zeros(shape);
    if (t.numel() != (ndim == 0 ? 1 : numel))
      throw ParseError("checkpoint: inconsistent tensor size");
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(sizeof(double) * t.data.size()));
    if (!is) throw ParseError("checkpoint: truncated parameter data");
    m.params.emplace(std::move(name), std::move(t));
  }
  is.peek();
  if (!is.eof()) throw ParseError("checkpoint: trailing bytes in " + path);

  auto layout = param_layout(s);
  if (layout.size() != m.params.size())
    throw ParseError("checkpoint: parameter set does not match the spec");
  for (const auto& [name, shape] : layout) {
    auto it = m.params.find(name);
    if (it == m.params.end())
      throw ParseError("checkpoint: missing parameter " + name);
    if (it->second.shape != shape)
      throw ParseError("checkpoint: shape mismatch for " + name);
  }
  return m;
}

}  // namespace pfn
