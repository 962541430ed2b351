#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace alertsynth {

// IPv4 or IPv6 address. IPv4 occupies the first four bytes.
class IpAddress {
 public:
  IpAddress() = default;

  static std::optional<IpAddress> parse(std::string_view text);
  static IpAddress v4(std::uint32_t host_order);

  bool is_v4() const { return family_ == 4; }
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
  std::string to_string() const;

  auto operator<=>(const IpAddress&) const = default;

 private:
  std::array<std::uint8_t, 16> bytes_{};
  std::uint8_t family_ = 4;
};

struct Cidr {
  IpAddress network;
  unsigned prefix = 0;

  // "10.0.0.0/8", "fd00::/8"; a bare address is a host route.
  static std::optional<Cidr> parse(std::string_view text);
  bool contains(const IpAddress& addr) const;
};

class HomeNet {
 public:
  HomeNet() = default;
  explicit HomeNet(std::vector<Cidr> ranges) : ranges_(std::move(ranges)) {}

  bool contains(const IpAddress& addr) const;
  const std::vector<Cidr>& ranges() const { return ranges_; }

 private:
  std::vector<Cidr> ranges_;
};

}  // namespace alertsynth

template <>
struct std::hash<alertsynth::IpAddress> {
  std::size_t operator()(const alertsynth::IpAddress& a) const noexcept {
    // FNV-1a over the address bytes.
    std::uint64_t h = 1469598103934665603ULL;
    for (auto b : a.bytes()) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h ^ (a.is_v4() ? 0 : 0x9e3779b97f4a7c15ULL));
  }
};
