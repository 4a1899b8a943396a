#include "edgesem/flow_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "edgesem/errors.hpp"

namespace edgesem {

SchemaMap SchemaMap::canonical() {
  SchemaMap s;
  s.ts = "ts";
  s.src_host = "src_host";
  s.dst_host = "dst_host";
  s.src_port = "src_port";
  s.dst_port = "dst_port";
  s.protocol = "protocol";
  s.duration = "duration";
  s.bytes = "bytes";
  s.packets = "packets";
  s.label = "label";
  return s;
}

SchemaMap SchemaMap::ctu13() {
  SchemaMap s;
  s.ts = "StartTime";
  s.src_host = "SrcAddr";
  s.dst_host = "DstAddr";
  s.src_port = "Sport";
  s.dst_port = "Dport";
  s.protocol = "Proto";
  s.duration = "Dur";
  s.bytes = "TotBytes";
  s.packets = "TotPkts";
  s.label = "Label";
  s.timestamp_format = "%Y/%m/%d %H:%M:%S";
  s.malicious_marker = "Botnet";
  return s;
}

SchemaMap SchemaMap::cicids2017() {
  SchemaMap s;
  s.ts = "Timestamp";
  s.src_host = "Source IP";
  s.dst_host = "Destination IP";
  s.src_port = "Source Port";
  s.dst_port = "Destination Port";
  s.protocol = "Protocol";
  s.duration = "Flow Duration";
  s.duration_scale = 1e-6;  // microseconds
  s.bytes = "Total Length of Fwd Packets";
  s.packets = "Total Fwd Packets";
  s.label = "Label";
  s.timestamp_format = "%d/%m/%Y %H:%M";
  s.benign_tag = "BENIGN";
  return s;
}

SchemaMap SchemaMap::preset(const std::string& name) {
  if (name == "canonical") return canonical();
  if (name == "ctu13") return ctu13();
  if (name == "cicids2017") return cicids2017();
  throw ConfigError("unknown dataset preset '" + name +
                    "' (expected canonical, ctu13 or cicids2017)");
}

namespace {

using csv::parse_double;

std::optional<std::uint16_t> parse_port(std::string_view text) {
  text = csv::trim(text);
  if (text.empty()) return std::nullopt;
  long value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    // CTU-13 writes some ports in hex (0x0303).
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      const auto [p2, e2] =
          std::from_chars(text.data() + 2, text.data() + text.size(), value, 16);
      if (e2 != std::errc() || p2 != text.data() + text.size())
        return std::nullopt;
    } else {
      return std::nullopt;
    }
  }
  if (value < 0 || value > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(value);
}

enum class RowStatus { ok, malformed, nonfinite, self_loop };

struct ColumnIndex {
  std::size_t ts, src_host, dst_host, protocol, duration, bytes, packets, label;
  std::optional<std::size_t> src_port, dst_port;
  std::size_t max_index = 0;
};

ColumnIndex resolve_columns(const std::vector<std::string>& header,
                            const SchemaMap& schema,
                            const std::filesystem::path& path) {
  std::map<std::string, std::size_t, std::less<>> by_name;
  for (std::size_t i = 0; i < header.size(); ++i)
    by_name.emplace(std::string(csv::trim(header[i])), i);

  auto required = [&](const std::string& field, const std::string& column) {
    if (column.empty())
      throw SchemaError("schema map leaves field '" + field + "' unmapped");
    const auto it = by_name.find(column);
    if (it == by_name.end())
      throw SchemaError(path.string() + ": header has no column '" + column +
                        "' (mapped to " + field + ")");
    return it->second;
  };
  auto optional = [&](const std::string& column) -> std::optional<std::size_t> {
    if (column.empty()) return std::nullopt;
    const auto it = by_name.find(column);
    if (it == by_name.end()) return std::nullopt;
    return it->second;
  };

  ColumnIndex c{};
  c.ts = required("ts", schema.ts);
  c.src_host = required("src_host", schema.src_host);
  c.dst_host = required("dst_host", schema.dst_host);
  c.protocol = required("protocol", schema.protocol);
  c.duration = required("duration", schema.duration);
  c.bytes = required("bytes", schema.bytes);
  c.packets = required("packets", schema.packets);
  c.label = required("label", schema.label);
  c.src_port = optional(schema.src_port);
  c.dst_port = optional(schema.dst_port);
  c.max_index = std::max({c.ts, c.src_host, c.dst_host, c.protocol, c.duration,
                          c.bytes, c.packets, c.label,
                          c.src_port.value_or(0), c.dst_port.value_or(0)});
  return c;
}

RowStatus convert_row(const std::vector<std::string>& fields,
                      const ColumnIndex& col, const SchemaMap& schema,
                      FlowRecord& out) {
  if (fields.size() <= col.max_index) return RowStatus::malformed;

  const auto ts = parse_timestamp(fields[col.ts], schema.timestamp_format);
  const auto duration = parse_double(fields[col.duration]);
  const auto bytes = parse_double(fields[col.bytes]);
  const auto packets = parse_double(fields[col.packets]);
  if (!ts || !duration || !bytes || !packets) return RowStatus::malformed;

  out.src_host = std::string(csv::trim(fields[col.src_host]));
  out.dst_host = std::string(csv::trim(fields[col.dst_host]));
  const std::string label(csv::trim(fields[col.label]));
  if (out.src_host.empty() || out.dst_host.empty() || label.empty())
    return RowStatus::malformed;

  out.ts = *ts;
  out.duration = *duration * schema.duration_scale;
  out.bytes = *bytes;
  out.packets = *packets;
  for (double v : {out.ts, out.duration, out.bytes, out.packets})
    if (!std::isfinite(v)) return RowStatus::nonfinite;
  if (out.duration < 0.0 || out.bytes < 0.0 || out.packets < 0.0)
    return RowStatus::nonfinite;

  if (out.src_host == out.dst_host) return RowStatus::self_loop;

  out.src_port = col.src_port ? parse_port(fields[*col.src_port]) : std::nullopt;
  out.dst_port = col.dst_port ? parse_port(fields[*col.dst_port]) : std::nullopt;
  out.protocol = std::string(csv::trim(fields[col.protocol]));

  out.malicious = schema.malicious_marker.empty()
                      ? label != schema.benign_tag
                      : label.find(schema.malicious_marker) != std::string::npos;
  out.label = out.malicious ? label : kBenignLabel;
  return RowStatus::ok;
}

}  // namespace

std::optional<double> parse_timestamp(const std::string& text,
                                      const std::string& format) {
  const std::string_view trimmed = csv::trim(text);
  if (format == "epoch") return parse_double(trimmed);

  std::tm tm{};
  std::istringstream in{std::string(trimmed)};
  in.imbue(std::locale::classic());
  in >> std::get_time(&tm, format.c_str());
  if (in.fail()) return std::nullopt;

  double seconds_extra = 0.0;
  std::string rest;
  std::getline(in, rest);
  std::string_view tail = csv::trim(rest);
  if (!tail.empty() && tail.front() == ':') {
    // Pattern stopped at minutes but the value carries seconds.
    tail.remove_prefix(1);
    const auto dot = tail.find('.');
    const auto secs = parse_double(tail.substr(0, dot));
    if (!secs) return std::nullopt;
    tm.tm_sec = static_cast<int>(*secs);
    tail = dot == std::string_view::npos ? std::string_view{} : tail.substr(dot);
  }
  if (!tail.empty()) {
    if (tail.front() != '.') return std::nullopt;
    const auto frac = parse_double(std::string("0") + std::string(tail));
    if (!frac) return std::nullopt;
    seconds_extra = *frac;
  }
  const std::time_t t = timegm(&tm);
  return static_cast<double>(t) + seconds_extra;
}

IngestStats for_each_flow(const std::filesystem::path& path,
                          const SchemaMap& schema,
                          const std::function<void(FlowRecord&&)>& sink) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open flow file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(path.string() + ": missing header row");
  // Tolerate a UTF-8 byte-order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const ColumnIndex col = resolve_columns(csv::split_line(line), schema, path);

  IngestStats stats;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++stats.rows_read;
    FlowRecord record;
    switch (convert_row(csv::split_line(line), col, schema, record)) {
      case RowStatus::ok:
        ++stats.accepted;
        sink(std::move(record));
        break;
      case RowStatus::malformed:
        ++stats.rejected_malformed;
        break;
      case RowStatus::nonfinite:
        ++stats.rejected_nonfinite;
        break;
      case RowStatus::self_loop:
        ++stats.rejected_self_loop;
        break;
    }
  }
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return stats;
}

ParsedFlows parse_flow_csv(const std::filesystem::path& path,
                           const SchemaMap& schema) {
  ParsedFlows out;
  out.stats = for_each_flow(path, schema, [&](FlowRecord&& r) {
    out.records.push_back(std::move(r));
  });
  return out;
}

namespace {

using csv::format_real;

}  // namespace

void write_canonical_csv(const std::filesystem::path& path,
                         std::span<const FlowRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "ts,src_host,dst_host,src_port,dst_port,protocol,duration,bytes,"
         "packets,label\n";
  for (const FlowRecord& r : records) {
    out << format_real(r.ts) << ',' << csv::escape(r.src_host) << ','
        << csv::escape(r.dst_host) << ',';
    if (r.src_port) out << *r.src_port;
    out << ',';
    if (r.dst_port) out << *r.dst_port;
    out << ',' << csv::escape(r.protocol) << ',' << format_real(r.duration)
        << ',' << format_real(r.bytes) << ',' << format_real(r.packets) << ','
        << csv::escape(r.label) << '\n';
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

std::vector<WindowBatch> partition_windows(std::span<const FlowRecord> records,
                                           double window_seconds) {
  if (!(window_seconds > 0.0) || !std::isfinite(window_seconds))
    throw ConfigError("window_seconds must be a positive finite number");
  std::vector<WindowBatch> batches;
  if (records.empty()) return batches;

  double t0 = records.front().ts;
  for (const FlowRecord& r : records) t0 = std::min(t0, r.ts);

  std::map<std::int64_t, std::vector<FlowRecord>> buckets;
  for (const FlowRecord& r : records) {
    const auto idx =
        static_cast<std::int64_t>(std::floor((r.ts - t0) / window_seconds));
    buckets[idx].push_back(r);
  }

  batches.reserve(buckets.size());
  for (auto& [idx, recs] : buckets) {
    WindowBatch b;
    b.window_index = idx;
    b.t_start = t0 + static_cast<double>(idx) * window_seconds;
    b.t_end = b.t_start + window_seconds;
    b.records = std::move(recs);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace edgesem
