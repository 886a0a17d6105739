#pragma once

#include "avt/dqn/network.hpp"
#include "avt/image.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace avt::dqn {

inline constexpr char kCheckpointMagic[8] = {'A', 'V', 'T', 'Q', 'N', 'E', 'T', '\0'};
inline constexpr char kCheckpointEnd[8] = {'A', 'V', 'T', 'Q', 'E', 'N', 'D', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const QNetworkConfig& c) {
  return {{"input_size", c.input_size},     {"input_channels", c.input_channels}, {"merge_filters", c.merge_filters},
          {"conv_filters", c.conv_filters}, {"extra_blocks", c.extra_blocks},     {"hidden", c.hidden},
          {"dropout", c.dropout},           {"actions", c.actions}};
}

inline QNetworkConfig network_config_from_json(const nlohmann::json& j) {
  QNetworkConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  c.merge_filters = j.at("merge_filters").get<int>();
  c.conv_filters = j.at("conv_filters").get<std::vector<int>>();
  c.extra_blocks = j.at("extra_blocks").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.dropout = j.at("dropout").get<double>();
  c.actions = j.at("actions").get<int>();
  return c;
}

struct Checkpoint {
  QNetworkConfig network;
  std::string config_echo;  // run configuration that produced the parameters
  std::string rng_state;
  std::vector<TensorInfo> tensors;
  std::vector<float> params;
};

namespace detail {

inline std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto* c = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<unsigned char> buf;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw CheckpointError("checkpoint: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    auto len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  float f32() {
    need(4);
    float v = read_f32_le(p_ + pos_);
    pos_ += 4;
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Layout: magic | version | network config (JSON) | config echo | rng state | tensor table with
/// per-tensor name, shape and little-endian float32 data | FNV-1a-64 of everything before | end magic.
inline std::vector<unsigned char> encode_checkpoint(const QNetwork<float>& net, const std::string& config_echo,
                                                    const std::string& rng_state) {
  detail::Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(to_json(net.config()).dump());
  w.str(config_echo);
  w.str(rng_state);
  w.u32(static_cast<std::uint32_t>(net.tensors().size()));
  auto params = net.params();
  for (const auto& t : net.tensors()) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size; ++i) append_f32_le(w.buf, params[t.offset + i]);
  }
  w.u64(detail::fnv1a(w.buf.data(), w.buf.size()));
  w.bytes(kCheckpointEnd, sizeof kCheckpointEnd);
  return std::move(w.buf);
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& buf) {
  constexpr std::size_t kFooter = 8 + sizeof kCheckpointEnd;
  if (buf.size() < sizeof kCheckpointMagic + 4 + kFooter) throw CheckpointError("checkpoint: file too short");
  if (!std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), buf.begin())) {
    throw CheckpointError("checkpoint: bad magic");
  }
  detail::Reader head(buf.data() + sizeof kCheckpointMagic, 4);
  std::uint32_t version = head.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  }
  // Integrity first: nothing is parsed unless the footer and checksum match.
  const std::size_t body = buf.size() - kFooter;
  if (!std::equal(std::begin(kCheckpointEnd), std::end(kCheckpointEnd), buf.begin() + static_cast<std::ptrdiff_t>(body + 8))) {
    throw CheckpointError("checkpoint: missing end marker (truncated or trailing bytes)");
  }
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[body + i]) << (8 * i);
  if (stored != detail::fnv1a(buf.data(), body)) throw CheckpointError("checkpoint: checksum mismatch");

  detail::Reader rr(buf.data() + sizeof kCheckpointMagic + 4, body - sizeof kCheckpointMagic - 4);
  Checkpoint ck;
  try {
    ck.network = network_config_from_json(nlohmann::json::parse(rr.str()));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad network config: ") + e.what());
  }
  ck.config_echo = rr.str();
  ck.rng_state = rr.str();
  QNetwork<float> layout(ck.network);
  std::uint32_t count = rr.u32();
  if (count != layout.tensors().size()) throw CheckpointError("checkpoint: tensor count does not match config");
  ck.params.assign(layout.param_count(), 0.0f);
  for (const auto& expected : layout.tensors()) {
    TensorInfo t;
    t.name = rr.str();
    std::uint32_t ndim = rr.u32();
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(static_cast<int>(rr.u32()));
    if (t.name != expected.name || t.shape != expected.shape) {
      throw CheckpointError("checkpoint: tensor " + t.name + " does not match the network layout");
    }
    t.offset = expected.offset;
    t.size = expected.size;
    for (std::size_t i = 0; i < t.size; ++i) ck.params[t.offset + i] = rr.f32();
    ck.tensors.push_back(std::move(t));
  }
  if (rr.pos() != body - sizeof kCheckpointMagic - 4) throw CheckpointError("checkpoint: unexpected extra payload");
  return ck;
}

inline void save_checkpoint(const std::string& path, const QNetwork<float>& net, const std::string& config_echo,
                            const std::string& rng_state) {
  auto buf = encode_checkpoint(net, config_echo, rng_state);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(buf);
}

inline QNetwork<float> network_from_checkpoint(const Checkpoint& ck) {
  QNetwork<float> net(ck.network);
  std::copy(ck.params.begin(), ck.params.end(), net.params().begin());
  return net;
}

}  // namespace avt::dqn
