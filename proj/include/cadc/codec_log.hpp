#pragma once

// Per-frame encoder statistics: x265 CSV logs, a generic JSON interchange
// format, and invariant checking.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cadc {

enum class FrameType { I, P, B };

char to_char(FrameType type) noexcept;

/// Statistics of one encoded frame. `display_index` is the presentation
/// order (POC); scoring only ever looks at display order.
struct FrameRecord {
  std::size_t display_index = 0;
  std::size_t encode_order = 0;
  FrameType frame_type = FrameType::P;
  double qp = 0.0;
  double bits = 0.0;
  std::optional<double> psnr_y;
  std::optional<double> psnr_u;
  std::optional<double> psnr_v;
  std::optional<double> psnr_yuv;
  std::optional<double> ssim;
  std::optional<std::size_t> gop_position;
  std::optional<std::size_t> temporal_layer;
  /// Columns that no computation consumes (skip/merge percentages, ...),
  /// kept verbatim by header name.
  std::map<std::string, std::string> extras;

  bool operator==(const FrameRecord&) const = default;
};

enum class LogSource { X265Csv, GenericJson, Synthetic };

struct FrameLogSeries {
  std::vector<FrameRecord> records;
  LogSource source = LogSource::Synthetic;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

struct ValidationIssue {
  std::size_t row = 0;  ///< position of the record within the series
  std::string field;
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool ok() const noexcept { return errors.empty(); }
};

/// Parse an x265 `--csv-log-level 1` file. Column order is free; columns are
/// matched by case-insensitive name with punctuation ignored. Recognised
/// aliases:
///
///   display_index  : POC, display index, display order
///   frame_type     : Type, frame type, slice type
///   qp             : QP, frame QP, avg QP
///   bits           : Bits, number of bits, frame bits
///   encode_order   : Encode Order, coding order
///   psnr_y/u/v/yuv : Y PSNR, PSNR Y, psnr_y (and U, V, YUV likewise)
///   ssim           : SSIM   (note: "SSIM (dB)" is a different column)
///   gop_position   : GOP Position, gop pos
///   temporal_layer : Temporal Layer, TId, tid
///
/// Frame types are taken from the first letter of the cell, so x265's
/// "I-SLICE", "b-SLICE" and "IDR" all map. Records are sorted by POC.
///
/// Throws ParseError with Errc::EmptyLog, MissingColumn or MalformedRow.
FrameLogSeries parse_x265_csv(std::string_view text);

/// Parse a JSON array of objects keyed by FrameRecord field names. Throws
/// ParseError(Errc::SchemaError) carrying the JSON pointer of the bad value.
FrameLogSeries parse_generic_json(std::string_view text);

std::string serialize_generic_json(const FrameLogSeries& series);

/// Checks every record invariant. Never throws.
ValidationReport validate(const FrameLogSeries& series);

std::string format_report(const ValidationReport& report);

}  // namespace cadc
