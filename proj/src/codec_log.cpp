#include "cadc/codec_log.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cadc/error.hpp"

namespace cadc {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::EmptyLog: return "EmptyLog";
    case Errc::SchemaError: return "SchemaError";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonPositiveTau: return "NonPositiveTau";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::AllZeroScales: return "AllZeroScales";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::PolicyCollapse: return "PolicyCollapse";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

char to_char(FrameType type) noexcept {
  switch (type) {
    case FrameType::I: return 'I';
    case FrameType::P: return 'P';
    case FrameType::B: return 'B';
  }
  return '?';
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string normalize_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<std::size_t> to_index(std::string_view s) {
  const auto value = to_double(s);
  if (!value || *value < 0.0 || *value != std::floor(*value) || *value > 1e15) return std::nullopt;
  return static_cast<std::size_t>(*value);
}

std::optional<FrameType> to_frame_type(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  switch (std::toupper(static_cast<unsigned char>(s.front()))) {
    case 'I': return FrameType::I;
    case 'P': return FrameType::P;
    case 'B': return FrameType::B;
    default: return std::nullopt;
  }
}

enum class Column {
  DisplayIndex, EncodeOrder, FrameType, Qp, Bits,
  PsnrY, PsnrU, PsnrV, PsnrYuv, Ssim, GopPosition, TemporalLayer,
};

std::optional<Column> match_column(std::string_view header) {
  static const std::map<std::string, Column> aliases = {
      {"poc", Column::DisplayIndex},        {"displayindex", Column::DisplayIndex},
      {"displayorder", Column::DisplayIndex}, {"encodeorder", Column::EncodeOrder},
      {"codingorder", Column::EncodeOrder}, {"type", Column::FrameType},
      {"frametype", Column::FrameType},     {"slicetype", Column::FrameType},
      {"qp", Column::Qp},                   {"frameqp", Column::Qp},
      {"avgqp", Column::Qp},                {"bits", Column::Bits},
      {"numberofbits", Column::Bits},       {"framebits", Column::Bits},
      {"ypsnr", Column::PsnrY},             {"psnry", Column::PsnrY},
      {"upsnr", Column::PsnrU},             {"psnru", Column::PsnrU},
      {"vpsnr", Column::PsnrV},             {"psnrv", Column::PsnrV},
      {"yuvpsnr", Column::PsnrYuv},         {"psnryuv", Column::PsnrYuv},
      {"ssim", Column::Ssim},               {"gopposition", Column::GopPosition},
      {"goppos", Column::GopPosition},      {"temporallayer", Column::TemporalLayer},
      {"tid", Column::TemporalLayer},
  };
  const auto it = aliases.find(normalize_name(header));
  if (it == aliases.end()) return std::nullopt;
  return it->second;
}

[[noreturn]] void malformed(std::size_t line, std::string_view header, std::string_view cell) {
  throw ParseError(Errc::MalformedRow,
                   "line " + std::to_string(line) + ": column '" + std::string(header) +
                       "' has invalid value '" + std::string(cell) + "'",
                   line);
}

}  // namespace

// ---------------------------------------------------------------------------
// x265 CSV
// ---------------------------------------------------------------------------

FrameLogSeries parse_x265_csv(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  {
    std::size_t start = 0;
    std::size_t number = 1;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!trim(line).empty()) lines.emplace_back(number, line);
      start = end + 1;
      ++number;
    }
  }
  if (lines.empty()) throw ParseError(Errc::EmptyLog, "log contains no header row");

  const auto header = split_fields(lines.front().second);
  std::vector<std::optional<Column>> columns;
  std::map<Column, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto column = match_column(header[i]);
    if (column && position.count(*column)) column.reset();  // first occurrence wins
    if (column) position[*column] = i;
    columns.push_back(column);
  }
  for (const auto& [column, name] : {std::pair{Column::DisplayIndex, "POC"},
                                     std::pair{Column::FrameType, "Type"},
                                     std::pair{Column::Qp, "QP"},
                                     std::pair{Column::Bits, "Bits"}}) {
    if (!position.count(column)) {
      throw ParseError(Errc::MissingColumn, std::string("required column '") + name + "' not found",
                       lines.front().first);
    }
  }
  if (lines.size() == 1) throw ParseError(Errc::EmptyLog, "log contains no frame rows");

  FrameLogSeries series;
  series.source = LogSource::X265Csv;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto [line_no, line] = lines[r];
    const auto cells = split_fields(line);
    FrameRecord rec;
    bool has_encode_order = false;
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string_view cell = i < cells.size() ? cells[i] : std::string_view{};
      if (!columns[i]) {
        if (!header[i].empty()) rec.extras.emplace(std::string(header[i]), std::string(cell));
        continue;
      }
      const Column column = *columns[i];
      const bool required = column == Column::DisplayIndex || column == Column::FrameType ||
                            column == Column::Qp || column == Column::Bits;
      if (cell.empty() && !required) continue;

      auto real = [&] {
        const auto v = to_double(cell);
        if (!v) malformed(line_no, header[i], cell);
        return *v;
      };
      auto index = [&] {
        const auto v = to_index(cell);
        if (!v) malformed(line_no, header[i], cell);
        return *v;
      };
      switch (column) {
        case Column::DisplayIndex: rec.display_index = index(); break;
        case Column::EncodeOrder:
          rec.encode_order = index();
          has_encode_order = true;
          break;
        case Column::FrameType: {
          const auto type = to_frame_type(cell);
          if (!type) malformed(line_no, header[i], cell);
          rec.frame_type = *type;
          break;
        }
        case Column::Qp: rec.qp = real(); break;
        case Column::Bits: rec.bits = real(); break;
        case Column::PsnrY: rec.psnr_y = real(); break;
        case Column::PsnrU: rec.psnr_u = real(); break;
        case Column::PsnrV: rec.psnr_v = real(); break;
        case Column::PsnrYuv: rec.psnr_yuv = real(); break;
        case Column::Ssim: rec.ssim = real(); break;
        case Column::GopPosition: rec.gop_position = index(); break;
        case Column::TemporalLayer: rec.temporal_layer = index(); break;
      }
    }
    if (!has_encode_order) rec.encode_order = r - 1;
    series.records.push_back(std::move(rec));
  }

  std::stable_sort(series.records.begin(), series.records.end(),
                   [](const FrameRecord& a, const FrameRecord& b) {
                     return a.display_index < b.display_index;
                   });
  return series;
}

// ---------------------------------------------------------------------------
// Generic JSON
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& message) {
  throw ParseError(Errc::SchemaError, path + ": " + message, std::nullopt, path);
}

double json_real(const json& value, const std::string& path) {
  if (!value.is_number()) schema_error(path, "expected a number");
  return value.get<double>();
}

std::size_t json_index(const json& value, const std::string& path) {
  if (value.is_number_unsigned()) return value.get<std::size_t>();
  if (value.is_number_float()) {
    const double v = value.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 1e15) return static_cast<std::size_t>(v);
  }
  schema_error(path, "expected a non-negative integer");
}

}  // namespace

FrameLogSeries parse_generic_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    schema_error("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) schema_error("", "expected an array of frame objects");
  if (doc.empty()) throw ParseError(Errc::EmptyLog, "log contains no frames", std::nullopt, "");

  FrameLogSeries series;
  series.source = LogSource::GenericJson;
  std::map<std::size_t, std::size_t> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& obj = doc[i];
    const std::string base = "/" + std::to_string(i);
    if (!obj.is_object()) schema_error(base, "expected an object");
    for (const char* key : {"display_index", "frame_type", "qp", "bits"}) {
      if (!obj.contains(key)) schema_error(base + "/" + key, "required key missing");
    }

    FrameRecord rec;
    bool has_encode_order = false;
    for (const auto& [key, value] : obj.items()) {
      const std::string path = base + "/" + key;
      if (key == "display_index") {
        rec.display_index = json_index(value, path);
      } else if (key == "encode_order") {
        rec.encode_order = json_index(value, path);
        has_encode_order = true;
      } else if (key == "frame_type") {
        if (!value.is_string() || value.get<std::string>().size() != 1 ||
            !to_frame_type(value.get<std::string>())) {
          schema_error(path, "expected \"I\", \"P\" or \"B\"");
        }
        rec.frame_type = *to_frame_type(value.get<std::string>());
      } else if (key == "qp") {
        rec.qp = json_real(value, path);
      } else if (key == "bits") {
        rec.bits = json_real(value, path);
      } else if (key == "psnr_y") {
        rec.psnr_y = json_real(value, path);
      } else if (key == "psnr_u") {
        rec.psnr_u = json_real(value, path);
      } else if (key == "psnr_v") {
        rec.psnr_v = json_real(value, path);
      } else if (key == "psnr_yuv") {
        rec.psnr_yuv = json_real(value, path);
      } else if (key == "ssim") {
        rec.ssim = json_real(value, path);
      } else if (key == "gop_position") {
        rec.gop_position = json_index(value, path);
      } else if (key == "temporal_layer") {
        rec.temporal_layer = json_index(value, path);
      } else if (key == "extras") {
        if (!value.is_object()) schema_error(path, "expected an object of strings");
        for (const auto& [name, cell] : value.items()) {
          if (!cell.is_string()) schema_error(path + "/" + name, "expected a string");
          rec.extras.emplace(name, cell.get<std::string>());
        }
      } else {
        schema_error(path, "unknown key");
      }
    }
    if (!has_encode_order) rec.encode_order = rec.display_index;
    if (const auto [it, inserted] = seen.emplace(rec.display_index, i); !inserted) {
      schema_error(base + "/display_index",
                   "duplicate display_index " + std::to_string(rec.display_index) +
                       " (first seen at /" + std::to_string(it->second) + ")");
    }
    series.records.push_back(std::move(rec));
  }

  std::stable_sort(series.records.begin(), series.records.end(),
                   [](const FrameRecord& a, const FrameRecord& b) {
                     return a.display_index < b.display_index;
                   });
  return series;
}

std::string serialize_generic_json(const FrameLogSeries& series) {
  json doc = json::array();
  for (const auto& rec : series.records) {
    json obj;
    obj["display_index"] = rec.display_index;
    obj["encode_order"] = rec.encode_order;
    obj["frame_type"] = std::string(1, to_char(rec.frame_type));
    obj["qp"] = rec.qp;
    obj["bits"] = rec.bits;
    if (rec.psnr_y) obj["psnr_y"] = *rec.psnr_y;
    if (rec.psnr_u) obj["psnr_u"] = *rec.psnr_u;
    if (rec.psnr_v) obj["psnr_v"] = *rec.psnr_v;
    if (rec.psnr_yuv) obj["psnr_yuv"] = *rec.psnr_yuv;
    if (rec.ssim) obj["ssim"] = *rec.ssim;
    if (rec.gop_position) obj["gop_position"] = *rec.gop_position;
    if (rec.temporal_layer) obj["temporal_layer"] = *rec.temporal_layer;
    if (!rec.extras.empty()) obj["extras"] = rec.extras;
    doc.push_back(std::move(obj));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

ValidationReport validate(const FrameLogSeries& series) {
  ValidationReport report;
  auto error = [&](std::size_t row, std::string field, std::string message) {
    report.errors.push_back({row, std::move(field), std::move(message)});
  };
  if (series.empty()) {
    error(0, "records", "series is empty");
    return report;
  }

  std::map<std::size_t, std::size_t> seen;
  for (std::size_t row = 0; row < series.size(); ++row) {
    const auto& rec = series.records[row];
    if (const auto [it, inserted] = seen.emplace(rec.display_index, row); !inserted) {
      error(row, "display_index",
            "duplicate display_index " + std::to_string(rec.display_index) + " (also row " +
                std::to_string(it->second) + ")");
    } else if (rec.display_index != row) {
      error(row, "display_index",
            "expected display_index " + std::to_string(row) + ", found " +
                std::to_string(rec.display_index) + " (indices must be 0..N-1 without gaps)");
    }
    if (!std::isfinite(rec.qp) || rec.qp < 0.0 || rec.qp > 63.0) {
      std::ostringstream os;
      os << "qp " << rec.qp << " out of range [0, 63]";
      error(row, "qp", os.str());
    }
    if (!std::isfinite(rec.bits) || rec.bits <= 0.0) {
      std::ostringstream os;
      os << "bits must be positive, found " << rec.bits;
      error(row, "bits", os.str());
    }
    for (const auto& [name, value] : {std::pair{"psnr_y", rec.psnr_y}, std::pair{"psnr_u", rec.psnr_u},
                                      std::pair{"psnr_v", rec.psnr_v},
                                      std::pair{"psnr_yuv", rec.psnr_yuv}}) {
      if (value && !(std::isfinite(*value) && *value > 0.0)) {
        error(row, name, "psnr must be finite and positive");
      }
    }
    if (rec.ssim && !(*rec.ssim >= 0.0 && *rec.ssim <= 1.0)) {
      error(row, "ssim", "ssim must lie in [0, 1]");
    }
  }

  // I-frames normally carry the most bits in their neighbourhood.
  for (std::size_t row = 0; row < series.size(); ++row) {
    const auto& rec = series.records[row];
    if (rec.frame_type != FrameType::I) continue;
    for (const std::size_t n : {row - 1, row + 1}) {
      if (n >= series.size()) continue;
      const auto& other = series.records[n];
      if (other.frame_type == FrameType::B && other.bits > rec.bits) {
        report.warnings.push_back({row, "bits",
                                   "I-frame has fewer bits than neighbouring B-frame at row " +
                                       std::to_string(n)});
        break;
      }
    }
  }
  return report;
}

std::string format_report(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& e : report.errors) {
    os << "error: row " << e.row << ", " << e.field << ": " << e.message << "\n";
  }
  for (const auto& w : report.warnings) {
    os << "warning: row " << w.row << ", " << w.field << ": " << w.message << "\n";
  }
  return os.str();
}

}  // namespace cadc
