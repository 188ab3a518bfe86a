#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "cadc/codec_log.hpp"
#include "cadc/error.hpp"

using namespace cadc;

namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(CADC_FIXTURE_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename F>
Errc error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return Errc::Io;
}

FrameRecord record(std::size_t index, FrameType type, double qp, double bits) {
  FrameRecord r;
  r.display_index = index;
  r.encode_order = index;
  r.frame_type = type;
  r.qp = qp;
  r.bits = bits;
  return r;
}

FrameLogSeries series_of(std::vector<FrameRecord> records) {
  FrameLogSeries s;
  s.records = std::move(records);
  return s;
}

}  // namespace

TEST_CASE("minimal x265 header and one row parse field by field") {
  const auto s = parse_x265_csv("Encode Order, Type, POC, QP, Bits\n0, I, 0, 27.00, 185000\n");
  REQUIRE(s.size() == 1);
  const auto& r = s.records[0];
  CHECK(r.display_index == 0);
  CHECK(r.encode_order == 0);
  CHECK(r.frame_type == FrameType::I);
  CHECK(r.qp == 27.0);
  CHECK(r.bits == 185000.0);
  CHECK_FALSE(r.psnr_y.has_value());
  CHECK_FALSE(r.ssim.has_value());
  CHECK(r.extras.empty());
  CHECK(s.source == LogSource::X265Csv);
}

TEST_CASE("clean fixture is sorted by POC and keeps unknown columns") {
  const auto s = parse_x265_csv(read_fixture("clean.csv"));
  REQUIRE(s.size() == 9);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.records[i].display_index == i);
  CHECK(s.records[0].frame_type == FrameType::I);
  CHECK(s.records[4].frame_type == FrameType::P);
  CHECK(s.records[1].frame_type == FrameType::B);  // "b-SLICE"
  CHECK(s.records[1].encode_order == 3);
  CHECK(s.records[4].encode_order == 1);
  CHECK(s.records[2].qp == 35.0);
  CHECK(s.records[2].bits == 20112.0);
  REQUIRE(s.records[0].psnr_y.has_value());
  CHECK(*s.records[0].psnr_y == 41.203);
  CHECK(*s.records[0].psnr_yuv == 42.001);
  CHECK(*s.records[0].ssim == 0.981);
  CHECK(s.records[0].extras.at("Scenecut") == "1");
  CHECK(s.records[0].extras.at("SSIM(dB)") == "17.212");
  CHECK(validate(s).ok());
  CHECK(validate(s).warnings.empty());
}

TEST_CASE("column aliases and free column order") {
  const auto s = parse_x265_csv(
      "avg qp,frame bits,slice type,display order,coding order,psnr_y,gop pos,TId\n"
      "30.5,1200,P,1,1,33.1,1,2\n"
      "26.25,9000,IDR,0,0,35.2,0,0\n");
  REQUIRE(s.size() == 2);
  CHECK(s.records[0].frame_type == FrameType::I);
  CHECK(s.records[0].qp == 26.25);
  CHECK(s.records[1].qp == 30.5);
  CHECK(s.records[1].bits == 1200.0);
  CHECK(*s.records[1].gop_position == 1);
  CHECK(*s.records[1].temporal_layer == 2);
  CHECK(*s.records[0].psnr_y == 35.2);
}

TEST_CASE("encode order defaults to row position") {
  const auto s = parse_x265_csv("Type,POC,QP,Bits\nI,0,27,100\nP,2,30,50\nB,1,32,20\n");
  CHECK(s.records[0].encode_order == 0);
  CHECK(s.records[1].encode_order == 2);
  CHECK(s.records[2].encode_order == 1);
}

TEST_CASE("CSV error cases") {
  CHECK(error_code([] { parse_x265_csv(""); }) == Errc::EmptyLog);
  CHECK(error_code([] { parse_x265_csv("\n\n"); }) == Errc::EmptyLog);
  CHECK(error_code([] { parse_x265_csv("Type,POC,QP,Bits\n"); }) == Errc::EmptyLog);
  CHECK(error_code([] { parse_x265_csv("Type,POC,Bits\nI,0,100\n"); }) == Errc::MissingColumn);
  CHECK(error_code([] { parse_x265_csv("Type,QP,Bits\nI,27,100\n"); }) == Errc::MissingColumn);

  try {
    parse_x265_csv("Type,POC,QP,Bits\nI,0,27,100\nP,1,abc,50\n");
    FAIL("expected MalformedRow");
  } catch (const ParseError& e) {
    CHECK(e.code() == Errc::MalformedRow);
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 3);
  }
  CHECK(error_code([] { parse_x265_csv("Type,POC,QP,Bits\nX,0,27,100\n"); }) == Errc::MalformedRow);
  CHECK(error_code([] { parse_x265_csv("Type,POC,QP,Bits\nI,-1,27,100\n"); }) == Errc::MalformedRow);
  CHECK(error_code([] { parse_x265_csv("Type,POC,QP,Bits\nI,0.5,27,100\n"); }) == Errc::MalformedRow);
  CHECK(error_code([] { parse_x265_csv("Type,POC,QP,Bits\nI,0,27\n"); }) == Errc::MalformedRow);
}

TEST_CASE("malformed fixture reports its file line") {
  try {
    parse_x265_csv(read_fixture("malformed.csv"));
    FAIL("expected MalformedRow");
  } catch (const ParseError& e) {
    CHECK(e.code() == Errc::MalformedRow);
    CHECK(*e.row() == 4);
  }
}

TEST_CASE("out-of-range fixture parses but fails validation on the QP field") {
  const auto s = parse_x265_csv(read_fixture("qp_out_of_range.csv"));
  const auto report = validate(s);
  REQUIRE(report.errors.size() == 1);
  CHECK(report.errors[0].row == 1);
  CHECK(report.errors[0].field == "qp");
  CHECK(format_report(report).find("row 1, qp") != std::string::npos);
}

TEST_CASE("CSV parsing is deterministic and row-order independent") {
  const std::string text = read_fixture("clean.csv");
  CHECK(parse_x265_csv(text).records == parse_x265_csv(text).records);

  std::istringstream in(text);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(rows.begin(), rows.end(), rng);
    std::string shuffled = header + "\n";
    for (const auto& r : rows) shuffled += r + "\n";
    const auto s = parse_x265_csv(shuffled);
    for (std::size_t i = 1; i < s.size(); ++i) {
      CHECK(s.records[i - 1].display_index < s.records[i].display_index);
    }
    CHECK(s.records == parse_x265_csv(text).records);
  }
}

TEST_CASE("minimal JSON document") {
  const auto s = parse_generic_json(R"([{"display_index":0,"frame_type":"I","qp":37,"bits":1000}])");
  REQUIRE(s.size() == 1);
  CHECK(s.records[0].frame_type == FrameType::I);
  CHECK(s.records[0].qp == 37.0);
  CHECK(s.records[0].bits == 1000.0);
  CHECK(s.records[0].encode_order == 0);
  CHECK(s.source == LogSource::GenericJson);
}

TEST_CASE("JSON schema errors carry the pointer of the bad value") {
  auto path_of = [](const std::string& text) {
    try {
      parse_generic_json(text);
    } catch (const ParseError& e) {
      CHECK(e.code() == Errc::SchemaError);
      return e.path();
    }
    FAIL("expected SchemaError");
    return std::string();
  };
  CHECK(path_of(R"([{"display_index":0,"frame_type":"I","qp":37,"bits":1},
                   {"display_index":0,"frame_type":"P","qp":38,"bits":1}])") == "/1/display_index");
  CHECK(path_of(R"([{"display_index":0,"frame_type":"I","qp":37}])") == "/0/bits");
  CHECK(path_of(R"([{"display_index":0,"frame_type":"I","qp":"x","bits":1}])") == "/0/qp");
  CHECK(path_of(R"([{"display_index":0,"frame_type":"IDR","qp":1,"bits":1}])") == "/0/frame_type");
  CHECK(path_of(R"([{"display_index":0,"frame_type":7,"qp":1,"bits":1}])") == "/0/frame_type");
  CHECK(path_of(R"([{"display_index":-1,"frame_type":"I","qp":1,"bits":1}])") == "/0/display_index");
  CHECK(path_of(R"([{"display_index":0,"frame_type":"I","qp":1,"bits":1,"colour":2}])") == "/0/colour");
  CHECK(path_of(R"({"display_index":0})") == "");
  CHECK(path_of("[{") == "");
  CHECK(error_code([] { parse_generic_json("[]"); }) == Errc::EmptyLog);
}

TEST_CASE("CSV and JSON renderings of the same frames agree") {
  const auto json = parse_generic_json(read_fixture("clean.json"));
  const auto csv = parse_x265_csv(
      "Encode Order,Type,POC,QP,Bits,Y PSNR\n"
      "0,I,0,27,182400,41.203\n1,P,4,33,61250,37.884\n2,B,2,35,20112,36.502\n"
      "3,B,1,37,9840,35.817\n4,B,3,37,10021,35.79\n");
  CHECK(json.records == csv.records);
}

TEST_CASE("JSON round trip is lossless for random series") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> real(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    FrameLogSeries s;
    const std::size_t n = 1 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      FrameRecord r = record(i, static_cast<FrameType>(rng() % 3), 63.0 * real(rng), 1.0 + 1e6 * real(rng));
      r.encode_order = rng() % 100;
      if (rng() % 2) r.psnr_y = 20.0 + 30.0 * real(rng);
      if (rng() % 2) r.psnr_u = 20.0 + 30.0 * real(rng);
      if (rng() % 2) r.psnr_v = 20.0 + 30.0 * real(rng);
      if (rng() % 2) r.psnr_yuv = 20.0 + 30.0 * real(rng);
      if (rng() % 2) r.ssim = real(rng);
      if (rng() % 2) r.gop_position = rng() % 32;
      if (rng() % 2) r.temporal_layer = rng() % 4;
      if (rng() % 3 == 0) r.extras["Scenecut"] = std::to_string(rng() % 2);
      s.records.push_back(r);
    }
    const auto back = parse_generic_json(serialize_generic_json(s));
    CHECK(back.records == s.records);
    CHECK(serialize_generic_json(back) == serialize_generic_json(s));
  }
}

TEST_CASE("validation of a valid three-frame series is clean") {
  const auto s = series_of({record(0, FrameType::I, 27, 9000), record(1, FrameType::B, 37, 1000),
                            record(2, FrameType::P, 32, 3000)});
  const auto report = validate(s);
  CHECK(report.ok());
  CHECK(report.errors.empty());
  CHECK(report.warnings.empty());
}

TEST_CASE("validation flags every invariant violation") {
  {
    auto s = series_of({record(0, FrameType::I, 27, 9000), record(1, FrameType::B, 37, 1000),
                        record(2, FrameType::P, 70, 3000)});
    const auto report = validate(s);
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].row == 2);
    CHECK(report.errors[0].field == "qp");
    CHECK(report.errors[0].message.find("out of range") != std::string::npos);
  }
  {
    auto s = series_of({record(0, FrameType::I, 27, 0)});
    const auto report = validate(s);
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].field == "bits");
    CHECK(report.errors[0].message.find("positive") != std::string::npos);
  }
  CHECK_FALSE(validate(series_of({record(0, FrameType::I, -0.5, 10)})).ok());
  CHECK(validate(series_of({record(0, FrameType::I, 0, 10)})).ok());
  CHECK(validate(series_of({record(0, FrameType::I, 63, 10)})).ok());
  CHECK_FALSE(validate(FrameLogSeries{}).ok());
  {
    auto s = series_of({record(0, FrameType::I, 27, 10), record(2, FrameType::P, 27, 10)});
    CHECK(validate(s).errors.at(0).field == "display_index");
  }
  {
    auto s = series_of({record(0, FrameType::I, 27, 10), record(0, FrameType::P, 27, 10)});
    CHECK_FALSE(validate(s).ok());
  }
  {
    auto r = record(0, FrameType::I, 27, 10);
    r.psnr_u = std::numeric_limits<double>::infinity();
    CHECK(validate(series_of({r})).errors.at(0).field == "psnr_u");
    r.psnr_u = 0.0;
    CHECK_FALSE(validate(series_of({r})).ok());
    r.psnr_u.reset();
    r.ssim = 1.5;
    CHECK(validate(series_of({r})).errors.at(0).field == "ssim");
  }
}

TEST_CASE("I-frame with fewer bits than a neighbouring B-frame is a warning") {
  const auto s = series_of({record(0, FrameType::I, 27, 500), record(1, FrameType::B, 37, 1000)});
  const auto report = validate(s);
  CHECK(report.ok());
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].row == 0);
  CHECK(format_report(report).rfind("warning: row 0", 0) == 0);
}
