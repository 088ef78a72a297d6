#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "uavsim/rl.hpp"

namespace uavsim {

namespace {

constexpr char kMagic[8] = {'U', 'A', 'V', 'P', 'P', 'O', '\0', '\1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 4);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void shape(const std::vector<int>& sizes) {
    u32(static_cast<std::uint32_t>(sizes.size()));
    for (int s : sizes) u32(static_cast<std::uint32_t>(s));
  }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("checkpoint truncated");
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw std::runtime_error("checkpoint string too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<int> shape() {
    const std::uint32_t n = u32();
    if (n < 2 || n > 64) throw std::runtime_error("checkpoint layer count out of range");
    std::vector<int> sizes(n);
    for (auto& s : sizes) {
      const std::uint32_t v = u32();
      if (v == 0 || v > (1u << 20)) throw std::runtime_error("checkpoint layer size out of range");
      s = static_cast<int>(v);
    }
    return sizes;
  }
  Eigen::VectorXd vec(std::size_t expected) {
    const std::uint64_t n = u64();
    if (n != expected) throw std::runtime_error("checkpoint parameter count mismatch");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParameters& policy,
                     const std::string& fingerprint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  Writer w(out);
  w.u32(kVersion);
  w.str(fingerprint);
  w.shape(policy.actor.sizes());
  w.shape(policy.critic.sizes());
  w.f64(policy.action_scale);
  w.f64(policy.learning_rate);
  w.i64(policy.updates);
  w.f64(policy.return_stats.count);
  w.f64(policy.return_stats.mean);
  w.f64(policy.return_stats.m2);
  w.i64(policy.adam.t);
  w.vec(policy.flatten());
  w.vec(policy.adam.m);
  w.vec(policy.adam.v);
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

PolicyParameters load_checkpoint(const std::string& path, std::string* fingerprint,
                                 const std::vector<int>* expected_actor,
                                 const std::vector<int>* expected_critic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  Reader r(in);
  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("'" + path + "' is not a policy checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const std::string fp = r.str();
  const std::vector<int> actor = r.shape();
  const std::vector<int> critic = r.shape();
  if (actor.back() != 2 || critic.back() != 1 || actor.front() != critic.front()) {
    throw std::runtime_error("checkpoint has inconsistent network shapes");
  }
  if ((expected_actor != nullptr && *expected_actor != actor) ||
      (expected_critic != nullptr && *expected_critic != critic)) {
    throw std::runtime_error("checkpoint network shapes do not match the scenario");
  }
  PolicyParameters p;
  p.actor = Mlp(actor);
  p.critic = Mlp(critic);
  p.action_scale = r.f64();
  p.learning_rate = r.f64();
  p.updates = r.i64();
  p.return_stats.count = r.f64();
  p.return_stats.mean = r.f64();
  p.return_stats.m2 = r.f64();
  p.adam.t = r.i64();
  p.unflatten(r.vec(p.num_params()));
  p.adam.m = r.vec(p.num_params());
  p.adam.v = r.vec(p.num_params());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint has trailing bytes");
  }
  if (fingerprint != nullptr) *fingerprint = fp;
  return p;
}

}  // namespace uavsim
