#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgesem {

/// One normalized flow-log row.
struct FlowRecord {
  double ts = 0.0;  ///< seconds since epoch
  std::string src_host;
  std::string dst_host;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::string protocol;
  double duration = 0.0;  ///< seconds
  double bytes = 0.0;
  double packets = 0.0;
  std::string label;  ///< "benign" for benign rows, source label otherwise
  bool malicious = false;

  bool operator==(const FlowRecord&) const = default;
};

inline constexpr const char* kBenignLabel = "benign";

/// How a source CSV maps onto FlowRecord fields.
///
/// Column names are matched after trimming surrounding whitespace. Each
/// required field names exactly one source column; ports may be left empty.
struct SchemaMap {
  std::string ts;
  std::string src_host;
  std::string dst_host;
  std::string src_port;  // optional column
  std::string dst_port;  // optional column
  std::string protocol;
  std::string duration;
  std::string bytes;
  std::string packets;
  std::string label;

  /// "epoch" for numeric seconds, otherwise a strftime-style pattern; a
  /// trailing fractional-seconds part after the pattern is accepted.
  std::string timestamp_format = "epoch";
  /// Multiplier turning the duration column into seconds.
  double duration_scale = 1.0;

  /// Label value denoting benign traffic; any other value is malicious.
  std::string benign_tag = kBenignLabel;
  /// When non-empty, a row is malicious iff its label contains this marker
  /// (CTU-13 style labels such as "flow=From-Botnet-V42-...").
  std::string malicious_marker;

  /// The canonical ts,src_host,dst_host,... layout this project writes.
  static SchemaMap canonical();
  /// CTU-13 bidirectional NetFlow (.binetflow) columns.
  static SchemaMap ctu13();
  /// CICIDS2017 flow CSVs with endpoint columns (TrafficLabelling export).
  static SchemaMap cicids2017();
  /// Looks up a preset by name: canonical, ctu13, cicids2017.
  static SchemaMap preset(const std::string& name);
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t accepted = 0;
  std::size_t rejected_malformed = 0;   ///< wrong arity, unparsable fields
  std::size_t rejected_nonfinite = 0;   ///< NaN/inf or negative quantities
  std::size_t rejected_self_loop = 0;   ///< src_host == dst_host

  std::size_t rejected() const {
    return rejected_malformed + rejected_nonfinite + rejected_self_loop;
  }
};

/// Streams accepted records of `path` to `sink` in file order.
///
/// Throws SchemaError if a mapped column is missing from the header and
/// IoError if the file cannot be read. Bad rows are counted and skipped.
IngestStats for_each_flow(const std::filesystem::path& path,
                          const SchemaMap& schema,
                          const std::function<void(FlowRecord&&)>& sink);

struct ParsedFlows {
  std::vector<FlowRecord> records;
  IngestStats stats;
};

ParsedFlows parse_flow_csv(const std::filesystem::path& path,
                           const SchemaMap& schema);

/// Writes records in the canonical schema.
void write_canonical_csv(const std::filesystem::path& path,
                         std::span<const FlowRecord> records);

/// Parses a timestamp field according to a SchemaMap timestamp_format.
std::optional<double> parse_timestamp(const std::string& text,
                                      const std::string& format);

/// Records of one fixed-length time window, in input order.
struct WindowBatch {
  std::int64_t window_index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<FlowRecord> records;
};

/// Buckets records into half-open windows [t0 + k*w, t0 + (k+1)*w) with t0
/// the minimum timestamp. Empty windows are omitted; batches are returned in
/// increasing window_index.
std::vector<WindowBatch> partition_windows(std::span<const FlowRecord> records,
                                           double window_seconds);

}  // namespace edgesem
