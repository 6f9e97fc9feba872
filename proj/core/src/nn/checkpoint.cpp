#include "artrec/nn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace artrec::nn {

namespace {

constexpr const char* kMagic = "artrec-ckpt v1";

std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

void write_tensor(std::ostream& os, const char* tag, const NumArray& t) {
  os << tag << " shape " << t.shape().size();
  for (int d : t.shape()) os << ' ' << d;
  os << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << hex_double(t[i]) << (((i + 1) % 8 == 0 || i + 1 == t.size()) ? '\n' : ' ');
  }
}

NumArray read_tensor(std::istream& is, const std::string& expected_tag) {
  std::string tag, shape_kw;
  std::size_t ndims = 0;
  is >> tag >> shape_kw >> ndims;
  if (tag != expected_tag || shape_kw != "shape")
    throw SchemaError("checkpoint: expected tensor tag '" + expected_tag + "'");
  std::vector<int> shape(ndims);
  for (auto& d : shape) is >> d;
  NumArray t(shape);
  std::string token;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(is >> token)) throw SchemaError("checkpoint: truncated tensor values");
    t[i] = parse_hex_double(token);
  }
  return t;
}

}  // namespace

void write_network(std::ostream& os, const Network& net) {
  os << kMagic << '\n';
  os << "seed " << net.seed() << '\n';
  os << "layers " << net.specs().size() << '\n';
  for (const auto& spec : net.specs()) {
    os << "spec " << layer_kind_name(spec.kind) << ' ' << spec.in_features << ' '
       << spec.out_features << ' ' << spec.in_channels << ' '
       << spec.out_channels << ' ' << spec.kernel << ' ' << spec.features << ' '
       << hex_double(spec.slope) << ' ' << spec.input_size << ' '
       << spec.hidden_size << '\n';
  }
  for (std::size_t l = 0; l < net.params().size(); ++l) {
    const auto& p = net.params()[l];
    os << "layer " << l << " tensors " << p.tensors.size() << " state "
       << p.state.size() << '\n';
    for (const auto& t : p.tensors) write_tensor(os, "t", t);
    for (const auto& t : p.state) write_tensor(os, "s", t);
  }
  os << "end\n";
}

Network read_network(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic)
    throw SchemaError("checkpoint: bad or missing header");
  std::string kw;
  std::uint64_t seed = 0;
  std::size_t n_layers = 0;
  is >> kw >> seed;
  if (kw != "seed") throw SchemaError("checkpoint: expected 'seed'");
  is >> kw >> n_layers;
  if (kw != "layers") throw SchemaError("checkpoint: expected 'layers'");

  std::vector<LayerSpec> specs(n_layers);
  for (auto& spec : specs) {
    std::string kind, slope;
    is >> kw >> kind >> spec.in_features >> spec.out_features >>
        spec.in_channels >> spec.out_channels >> spec.kernel >> spec.features >>
        slope >> spec.input_size >> spec.hidden_size;
    if (kw != "spec") throw SchemaError("checkpoint: expected 'spec'");
    spec.kind = layer_kind_from_name(kind);
    spec.slope = parse_hex_double(slope);
  }

  Network net(specs, seed);
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::size_t idx = 0, n_tensors = 0, n_state = 0;
    std::string tkw, skw;
    is >> kw >> idx >> tkw >> n_tensors >> skw >> n_state;
    if (kw != "layer" || idx != l || tkw != "tensors" || skw != "state")
      throw SchemaError("checkpoint: malformed layer block");
    auto& p = net.params()[l];
    if (n_tensors != p.tensors.size() || n_state != p.state.size())
      throw SchemaError("checkpoint: tensor count does not match layer spec");
    for (auto& t : p.tensors) {
      NumArray loaded = read_tensor(is, "t");
      if (loaded.shape() != t.shape())
        throw SchemaError("checkpoint: tensor shape mismatch");
      t = std::move(loaded);
    }
    for (auto& t : p.state) {
      NumArray loaded = read_tensor(is, "s");
      if (loaded.shape() != t.shape())
        throw SchemaError("checkpoint: state shape mismatch");
      t = std::move(loaded);
    }
  }
  is >> kw;
  if (kw != "end") throw SchemaError("checkpoint: missing trailer");
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  write_network(os, net);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  return read_network(is);
}

}  // namespace artrec::nn
