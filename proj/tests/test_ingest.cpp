#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "alertsynth/ingest.hpp"
#include "fixtures.hpp"

using namespace alertsynth;
using namespace std::chrono_literals;

namespace {

const char* kKerberosLine =
    R"({"timestamp":"2020-07-24T12:00:00.000001Z","src_ip":"198.51.100.7","dest_ip":"10.0.0.5",)"
    R"("src_port":50000,"dest_port":88,"proto":"TCP","alert":{"signature_id":2022494,)"
    R"("signature":"ET POLICY Kerberos ..."}})";

AlertReader reader_over(const std::string& text, double speedup = 0, AlertReader::Sleeper sleeper = {}) {
  auto in = std::make_unique<std::istringstream>(text);
  return AlertReader(std::make_unique<StreamLineSource>(std::move(in)), {}, speedup, std::move(sleeper));
}

std::string line_at(double seconds, const char* src = "198.51.100.7") {
  return R"({"timestamp":")" + format_iso8601(fixtures::at(seconds)) + R"(","src_ip":")" + src +
         R"(","dest_ip":"10.0.0.5","dest_port":80,"proto":"TCP","alert":{"signature_id":1,"signature":"x"}})";
}

}  // namespace

TEST(ParseAlertLine, MapsEveFields) {
  auto r = parse_alert_line(kKerberosLine, 7);
  ASSERT_TRUE(std::holds_alternative<Alert>(r));
  const auto& a = std::get<Alert>(r);
  EXPECT_EQ(format_iso8601(a.ts), "2020-07-24T12:00:00.000001Z");
  EXPECT_EQ(a.src_ip.to_string(), "198.51.100.7");
  EXPECT_EQ(a.dst_ip.to_string(), "10.0.0.5");
  EXPECT_EQ(a.src_port, 50000);
  EXPECT_EQ(a.dst_port, 88);
  EXPECT_EQ(a.proto, Proto::tcp);
  EXPECT_EQ(a.signature_id, 2022494);
  EXPECT_EQ(a.signature_text, "ET POLICY Kerberos ...");
  EXPECT_EQ(a.raw_seq, 7u);
}

TEST(ParseAlertLine, MissingTimestamp) {
  auto r = parse_alert_line(R"({"src_ip":"1.2.3.4","dest_ip":"5.6.7.8"})", 0);
  ASSERT_TRUE(std::holds_alternative<ParseError>(r));
  EXPECT_EQ(std::get<ParseError>(r).kind, ParseErrorKind::missing_field);
  EXPECT_EQ(std::get<ParseError>(r).detail, "timestamp");
}

TEST(ParseAlertLine, NotJson) {
  auto r = parse_alert_line("not json", 0);
  ASSERT_TRUE(std::holds_alternative<ParseError>(r));
  EXPECT_EQ(std::get<ParseError>(r).kind, ParseErrorKind::malformed);
  EXPECT_EQ(std::get<ParseError>(r).detail, "not json");
}

TEST(ParseAlertLine, HostNamesCountAsMissing) {
  auto r = parse_alert_line(R"({"timestamp":"2020-07-24T12:00:00Z","src_ip":"dc01.corp","dest_ip":"10.0.0.1"})", 0);
  ASSERT_TRUE(std::holds_alternative<ParseError>(r));
  EXPECT_EQ(std::get<ParseError>(r).kind, ParseErrorKind::missing_field);
  EXPECT_EQ(std::get<ParseError>(r).detail, "src_ip");
}

TEST(ParseAlertLine, AcceptsIpv6AndIgnoresUnknownKeys) {
  auto r = parse_alert_line(
      R"({"timestamp":"2020-07-24T12:00:00Z","src_ip":"2001:db8::7","dest_ip":"fd00::5","flow_id":99,"proto":"UDP"})", 0);
  ASSERT_TRUE(std::holds_alternative<Alert>(r));
  EXPECT_FALSE(std::get<Alert>(r).src_ip.is_v4());
  EXPECT_EQ(std::get<Alert>(r).proto, Proto::udp);
  EXPECT_FALSE(std::get<Alert>(r).dst_port);
}

TEST(ParseAlertLine, AliasesRedirectKeys) {
  KeyAliases aliases{{"timestamp", "event.time"}, {"src_ip", "source.address"}, {"dest_ip", "destination.address"}};
  auto r = parse_alert_line(
      R"({"event":{"time":"2020-07-24T12:00:00Z"},"source":{"address":"198.51.100.7"},"destination":{"address":"10.0.0.5"}})",
      0, aliases);
  ASSERT_TRUE(std::holds_alternative<Alert>(r));
  EXPECT_EQ(std::get<Alert>(r).src_ip.to_string(), "198.51.100.7");
}

TEST(SourceSpec, ParsesForms) {
  EXPECT_EQ(SourceSpec::parse("-").kind, SourceSpec::Kind::stdin_stream);
  EXPECT_EQ(SourceSpec::parse("stdin").kind, SourceSpec::Kind::stdin_stream);
  auto tcp = SourceSpec::parse("tcp:127.0.0.1:9000");
  EXPECT_EQ(tcp.kind, SourceSpec::Kind::tcp_listen);
  EXPECT_EQ(tcp.location, "127.0.0.1:9000");
  auto file = SourceSpec::parse("file:/tmp/x.jsonl", 10);
  EXPECT_EQ(file.kind, SourceSpec::Kind::file_replay);
  EXPECT_EQ(file.location, "/tmp/x.jsonl");
  EXPECT_EQ(file.speedup, 10);
  EXPECT_THROW(SourceSpec::parse("x", -1), ConfigError);
}

TEST(AlertReader, ThreeLinesNoSleeping) {
  int sleeps = 0;
  auto reader = reader_over(line_at(0) + "\n" + line_at(1) + "\n" + line_at(2) + "\n", 0,
                            [&](Duration) { ++sleeps; });
  Alert a;
  std::vector<std::uint64_t> seqs;
  while (reader.next(a) == AlertReader::Status::alert) seqs.push_back(a.raw_seq);
  EXPECT_EQ(seqs, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(sleeps, 0);
}

TEST(AlertReader, SpeedupScalesSleeps) {
  std::vector<Duration> sleeps;
  auto reader = reader_over(line_at(0) + "\n" + line_at(10) + "\n", 10, [&](Duration d) { sleeps.push_back(d); });
  Alert a;
  while (reader.next(a) == AlertReader::Status::alert) {
  }
  ASSERT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(sleeps[0], Duration(1s));
}

TEST(AlertReader, RealSleepIsPaced) {
  auto reader = reader_over(line_at(0) + "\n" + line_at(10) + "\n", 50);
  Alert a;
  ASSERT_EQ(reader.next(a), AlertReader::Status::alert);
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(reader.next(a), AlertReader::Status::alert);
  const auto waited = std::chrono::steady_clock::now() - t0;
  EXPECT_GE(waited, 190ms);
  EXPECT_LT(waited, 2s);
}

TEST(AlertReader, EmptyInputEndsCleanly) {
  auto reader = reader_over("");
  Alert a;
  EXPECT_EQ(reader.next(a), AlertReader::Status::end);
  EXPECT_EQ(reader.counters().lines, 0u);
}

TEST(AlertReader, RejectedPlusEmittedEqualsLines) {
  std::string text = line_at(0) + "\nnot json\n" + R"({"src_ip":"1.2.3.4","dest_ip":"5.6.7.8"})" + "\n" +
                     line_at(5) + "\n" + line_at(3) + "\n\n";
  auto reader = reader_over(text);
  Alert a;
  std::vector<std::uint64_t> seqs;
  while (reader.next(a) == AlertReader::Status::alert) seqs.push_back(a.raw_seq);
  const auto& c = reader.counters();
  EXPECT_EQ(c.lines, 6u);
  EXPECT_EQ(c.emitted + c.rejected(), c.lines);
  EXPECT_EQ(c.malformed, 2u);
  EXPECT_EQ(c.missing_field, 1u);
  EXPECT_EQ(c.out_of_order, 1u);
  // raw_seq is the line ordinal and keeps increasing across rejects.
  EXPECT_EQ(seqs, (std::vector<std::uint64_t>{0, 3, 4}));
}

TEST(AlertReader, ReplayIsDeterministic) {
  fixtures::TempDir dir("replay");
  const auto path = dir.path() / "alerts.jsonl";
  {
    std::ofstream out(path);
    for (int i = 0; i < 50; ++i) out << line_at(i * 1.5) << '\n';
  }
  auto read_all = [&] {
    auto reader = open_source(SourceSpec::parse(path.string()));
    std::vector<std::string> out;
    Alert a;
    while (reader.next(a) == AlertReader::Status::alert) {
      out.push_back(format_iso8601(a.ts) + a.src_ip.to_string() + std::to_string(a.raw_seq));
    }
    return out;
  };
  EXPECT_EQ(read_all(), read_all());
}

TEST(OpenSource, MissingFileIsFatal) {
  EXPECT_THROW(open_source(SourceSpec::parse("/nonexistent/alerts.jsonl")), SourceError);
}

TEST(TcpSource, ReadsNewlineDelimitedRecords) {
  auto source = std::make_unique<TcpLineSource>("127.0.0.1", 0);
  const auto port = source->bound_port();
  ASSERT_NE(port, 0);
  TcpLineSource* raw = source.get();
  AlertReader reader(std::move(source));

  std::thread client([port] {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
      // The last record has no newline; closing the connection ends it.
      const std::string payload = line_at(0) + "\n" + line_at(1) + "\n" + line_at(2);
      // Split mid-record to exercise buffering.
      ::send(fd, payload.data(), 40, 0);
      std::this_thread::sleep_for(50ms);
      ::send(fd, payload.data() + 40, payload.size() - 40, 0);
    }
    ::close(fd);
  });

  std::vector<std::uint64_t> seqs;
  Alert a;
  const auto give_up = std::chrono::steady_clock::now() + 10s;
  while (seqs.size() < 3 && std::chrono::steady_clock::now() < give_up) {
    const auto status = reader.next(a);
    ASSERT_NE(status, AlertReader::Status::error);
    if (status == AlertReader::Status::alert) seqs.push_back(a.raw_seq);
  }
  client.join();
  EXPECT_EQ(seqs, (std::vector<std::uint64_t>{0, 1, 2}));
  raw->request_stop();
  EXPECT_EQ(reader.next(a), AlertReader::Status::end);
}
