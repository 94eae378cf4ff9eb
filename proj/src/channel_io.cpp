#include "cfmimo/channel_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cfmimo {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'C', 'H'};
// Guards against absurd headers before any allocation happens.
constexpr std::uint32_t kMaxDim = 1u << 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("channel file is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t dim(std::uint32_t v, const char* what) {
  if (v == 0 || v > kMaxDim) {
    throw FormatError(std::string("channel file: ") + what + " out of range");
  }
  return v;
}

}  // namespace

std::string encode_channels(const ChannelSet& channels) {
  std::string out(kMagic, 4);
  put_u32(out, kChannelFileVersion);
  put_u32(out, static_cast<std::uint32_t>(channels.num_aps()));
  put_u32(out, static_cast<std::uint32_t>(channels.num_ues()));
  for (int i = 0; i < channels.num_aps(); ++i) {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const CMat& h = channels.channel(i, k);
      put_u32(out, static_cast<std::uint32_t>(h.rows()));
      put_u32(out, static_cast<std::uint32_t>(h.cols()));
      for (Eigen::Index r = 0; r < h.rows(); ++r) {
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
          put_f64(out, h(r, c).real());
          put_f64(out, h(r, c).imag());
        }
      }
    }
  }
  for (int k = 0; k < channels.num_ues(); ++k) {
    put_f64(out, channels.has_noise() ? channels.noise_power(k) : 0.0);
  }
  for (int k = 0; k < channels.num_ues(); ++k) {
    const auto& s = channels.serving_aps(k);
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    for (int i : s) put_u32(out, static_cast<std::uint32_t>(i));
  }
  return out;
}

ChannelSet decode_channels(const std::string& bytes) {
  Reader in(bytes);
  in.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("channel file: bad magic");
  in.skip(4);
  const std::uint32_t version = in.u32();
  if (version != kChannelFileVersion) {
    throw FormatError("channel file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t num_aps = dim(in.u32(), "AP count");
  const std::uint32_t num_ues = dim(in.u32(), "UE count");

  PairGrid<CMat> h(num_aps, num_ues);
  for (std::uint32_t i = 0; i < num_aps; ++i) {
    for (std::uint32_t k = 0; k < num_ues; ++k) {
      const std::uint32_t n = dim(in.u32(), "N_k");
      const std::uint32_t m = dim(in.u32(), "M_i");
      if (i > 0 && n != h(0, k).rows()) throw FormatError("channel file: N_k differs across APs");
      if (k > 0 && m != h(i, 0).cols()) throw FormatError("channel file: M_i differs across UEs");
      in.need(static_cast<std::size_t>(n) * m * 16);
      CMat hik(n, m);
      for (std::uint32_t r = 0; r < n; ++r) {
        for (std::uint32_t c = 0; c < m; ++c) {
          const double re = in.f64();
          const double im = in.f64();
          hik(r, c) = cdouble(re, im);
        }
      }
      h(i, k) = std::move(hik);
    }
  }
  std::vector<double> sigma2(num_ues);
  for (auto& s : sigma2) s = in.f64();
  std::vector<std::vector<int>> serving(num_ues);
  for (auto& s : serving) {
    const std::uint32_t len = in.u32();
    if (len > num_aps) throw FormatError("channel file: serving set larger than I");
    for (std::uint32_t j = 0; j < len; ++j) {
      const std::uint32_t idx = in.u32();
      if (idx >= num_aps) throw FormatError("channel file: serving AP index out of range");
      s.push_back(static_cast<int>(idx));
    }
  }
  if (in.remaining() != 0) throw FormatError("channel file: trailing bytes");

  ChannelSet out;
  try {
    out = ChannelSet(std::move(h), std::move(serving));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("channel file: ") + e.what());
  }
  const bool unset = std::all_of(sigma2.begin(), sigma2.end(), [](double s) { return s == 0.0; });
  if (!unset) {
    try {
      out.set_noise_powers(std::move(sigma2));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("channel file: ") + e.what());
    }
  }
  return out;
}

void dump_channels(const ChannelSet& channels, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_channels(channels);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

ChannelSet load_channels(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_channels(bytes);
}

}  // namespace cfmimo
