#include "dua/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <type_traits>

#include "dua/error.hpp"
#include "dua/settings.hpp"

namespace dua::train {
namespace {

constexpr char kMagic[4] = {'D', 'U', 'A', '1'};

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    return out;
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <class U>
  void uint(U v) {
    v = to_little(v);
    bytes(&v, sizeof v);
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void real(Real v) {
    using Bits = std::conditional_t<sizeof(Real) == 8, std::uint64_t, std::uint32_t>;
    uint(std::bit_cast<Bits>(v));
  }
  void text(const std::string& s) {
    uint<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void reals(const Tensor& t) {
    for (Real v : t.data()) real(v);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::string buffer) : buf_(std::move(buffer)) {}

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == buf_.size(); }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw FormatError("checkpoint: " + what + " at offset " + std::to_string(at));
  }

  const char* take(std::size_t n, const char* what) {
    if (n > buf_.size() - pos_) fail(std::string("truncated while reading ") + what, pos_);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <class U>
  U uint(const char* what) {
    U v;
    std::memcpy(&v, take(sizeof v, what), sizeof v);
    return to_little(v);
  }
  double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
  Real real(unsigned width, const char* what) {
    if (width == 8) return static_cast<Real>(std::bit_cast<double>(uint<std::uint64_t>(what)));
    return static_cast<Real>(std::bit_cast<float>(uint<std::uint32_t>(what)));
  }
  std::string text(const char* what) {
    const std::size_t at = pos_;
    const auto n = uint<std::uint64_t>(what);
    if (n > buf_.size() - pos_) fail(std::string("length of ") + what + " exceeds file size", at);
    return std::string(take(n, what), n);
  }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

std::string format_meta(const TrainingMeta& meta, std::size_t min_count) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch=" << meta.epoch << '\n'
      << "validation_metric=" << meta.validation_metric << '\n'
      << "validation_score=" << meta.validation_score << '\n'
      << "min_count=" << min_count << '\n';
  return out.str();
}

TrainingMeta parse_meta(const std::string& text, Reader& r, std::size_t at) {
  TrainingMeta meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) r.fail("malformed metadata line '" + line + "'", at);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "epoch") meta.epoch = std::stoull(value);
      else if (key == "validation_metric") meta.validation_metric = value;
      else if (key == "validation_score") meta.validation_score = std::stod(value);
    } catch (const std::exception&) {
      r.fail("bad metadata value for '" + key + "'", at);
    }
  }
  return meta;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  model::check_params(ckpt.config, ckpt.params);
  Writer w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(ckpt.version);
  w.uint<std::uint8_t>(sizeof(Real));
  w.text(config::format_model_config(ckpt.config));
  w.text(ckpt.vocab.serialize());
  w.text(format_meta(ckpt.meta, ckpt.vocab.min_count()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.uint<std::uint64_t>(d);
    w.reals(t);
  }
  w.uint<std::uint8_t>(ckpt.adam ? 1 : 0);
  if (ckpt.adam) {
    const AdamState& a = *ckpt.adam;
    w.uint<std::uint64_t>(a.step);
    w.f64(a.learning_rate);
    w.f64(a.beta1);
    w.f64(a.beta2);
    w.f64(a.epsilon);
    for (const auto& [name, t] : ckpt.params) {
      auto m = a.m.find(name);
      auto v = a.v.find(name);
      w.reals(m != a.m.end() ? m->second : Tensor(t.shape()));
      w.reals(v != a.v.end() ? v->second : Tensor(t.shape()));
    }
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  Checkpoint ckpt;

  const char* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic (not a checkpoint)", 0);
  std::size_t at = r.offset();
  ckpt.version = r.uint<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(ckpt.version), at);
  }
  at = r.offset();
  const unsigned width = r.uint<std::uint8_t>("real width");
  if (width != 4 && width != 8) r.fail("unsupported real width " + std::to_string(width), at);

  at = r.offset();
  const std::string config_text = r.text("config");
  try {
    ckpt.config = config::parse_model_config(config_text);
    ckpt.config.validate();
  } catch (const std::exception& e) {
    r.fail(std::string("invalid config section (") + e.what() + ")", at);
  }

  at = r.offset();
  const std::string vocab_text = r.text("vocabulary");
  try {
    ckpt.vocab = data::Vocabulary::parse(vocab_text);
  } catch (const std::exception& e) {
    r.fail(std::string("invalid vocabulary section (") + e.what() + ")", at);
  }
  if (ckpt.vocab.size() != ckpt.config.vocab_size) {
    r.fail("vocabulary has " + std::to_string(ckpt.vocab.size()) + " tokens but config says " +
               std::to_string(ckpt.config.vocab_size),
           at);
  }

  at = r.offset();
  ckpt.meta = parse_meta(r.text("metadata"), r, at);

  const auto expected = model::parameter_shapes(ckpt.config);
  at = r.offset();
  const auto count = r.uint<std::uint32_t>("parameter count");
  if (count != expected.size()) {
    r.fail("expected " + std::to_string(expected.size()) + " parameters, found " + std::to_string(count), at);
  }
  std::vector<std::string> order;
  for (std::uint32_t i = 0; i < count; ++i) {
    at = r.offset();
    const auto name_len = r.uint<std::uint32_t>("parameter name length");
    std::string name(r.take(name_len, "parameter name"), name_len);
    auto want = expected.find(name);
    if (want == expected.end()) r.fail("unexpected parameter '" + name + "'", at);
    if (ckpt.params.contains(name)) r.fail("duplicate parameter '" + name + "'", at);
    const auto rank = r.uint<std::uint32_t>("parameter rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank && d < 8; ++d) shape.push_back(r.uint<std::uint64_t>("parameter dims"));
    if (shape != want->second) {
      r.fail("parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                 shape_string(want->second),
             at);
    }
    Tensor t(shape);
    for (Real& v : t.data()) v = r.real(width, "parameter values");
    ckpt.params.emplace(name, std::move(t));
    order.push_back(name);
  }

  at = r.offset();
  const auto has_adam = r.uint<std::uint8_t>("optimizer flag");
  if (has_adam > 1) r.fail("bad optimizer flag", at);
  if (has_adam) {
    AdamState a;
    a.step = r.uint<std::uint64_t>("optimizer step");
    a.learning_rate = static_cast<Real>(r.f64("learning rate"));
    a.beta1 = static_cast<Real>(r.f64("beta1"));
    a.beta2 = static_cast<Real>(r.f64("beta2"));
    a.epsilon = static_cast<Real>(r.f64("epsilon"));
    for (const auto& name : order) {
      const Shape& shape = ckpt.params.at(name).shape();
      Tensor m(shape), v(shape);
      for (Real& x : m.data()) x = r.real(width, "optimizer moments");
      for (Real& x : v.data()) x = r.real(width, "optimizer moments");
      a.m.emplace(name, std::move(m));
      a.v.emplace(name, std::move(v));
    }
    ckpt.adam = std::move(a);
  }
  if (!r.at_end()) r.fail("trailing bytes", r.offset());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace dua::train
