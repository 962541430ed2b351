#include "alertsynth/ip.hpp"

#include <arpa/inet.h>

#include <charconv>

#include "alertsynth/common.hpp"

namespace alertsynth {

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  text = trim(text);
  if (text.empty() || text.size() > INET6_ADDRSTRLEN) return std::nullopt;
  const std::string s(text);
  IpAddress out;
  if (s.find(':') == std::string::npos) {
    if (inet_pton(AF_INET, s.c_str(), out.bytes_.data()) != 1) return std::nullopt;
    out.family_ = 4;
  } else {
    if (inet_pton(AF_INET6, s.c_str(), out.bytes_.data()) != 1) return std::nullopt;
    out.family_ = 6;
  }
  return out;
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress out;
  out.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
  out.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
  out.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
  out.bytes_[3] = static_cast<std::uint8_t>(host_order);
  return out;
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  inet_ntop(is_v4() ? AF_INET : AF_INET6, bytes_.data(), buf, sizeof buf);
  return buf;
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  text = trim(text);
  const auto slash = text.find('/');
  auto addr = IpAddress::parse(text.substr(0, slash));
  if (!addr) return std::nullopt;
  const unsigned max_prefix = addr->is_v4() ? 32 : 128;
  unsigned prefix = max_prefix;
  if (slash != std::string_view::npos) {
    const auto digits = text.substr(slash + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || prefix > max_prefix) {
      return std::nullopt;
    }
  }
  return Cidr{*addr, prefix};
}

bool Cidr::contains(const IpAddress& addr) const {
  if (addr.is_v4() != network.is_v4()) return false;
  const auto& a = addr.bytes();
  const auto& n = network.bytes();
  unsigned bits = prefix;
  for (std::size_t i = 0; bits > 0; ++i) {
    const unsigned take = bits >= 8 ? 8 : bits;
    const auto mask = static_cast<std::uint8_t>(0xFFu << (8 - take));
    if ((a[i] & mask) != (n[i] & mask)) return false;
    bits -= take;
  }
  return true;
}

bool HomeNet::contains(const IpAddress& addr) const {
  for (const auto& r : ranges_) {
    if (r.contains(addr)) return true;
  }
  return false;
}

}  // namespace alertsynth
