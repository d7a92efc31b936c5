#include "gflowlab/record.hpp"

#include <cmath>

#include <fmt/format.h>

#include "json.hpp"

#include "gflowlab/error.hpp"

namespace gflowlab {
namespace {

void put_double(std::string& out, std::optional<double> v) {
  if (v && std::isfinite(*v)) {
    fmt::format_to(std::back_inserter(out), "{:.9g}", *v);
  } else {
    out += "null";
  }
}

template <typename T>
void put_int(std::string& out, std::optional<T> v) {
  if (v) {
    fmt::format_to(std::back_inserter(out), "{}", *v);
  } else {
    out += "null";
  }
}

}  // namespace

std::string format_record(const MetricRecord& r) {
  std::string out;
  out.reserve(256);
  out += "{\"round\":";
  put_int<int>(out, r.round);
  out += ",\"trajectories_seen\":";
  put_int<std::uint64_t>(out, r.trajectories_seen);
  out += ",\"loss\":";
  put_double(out, r.loss);
  out += ",\"pbp_loss\":";
  put_double(out, r.pbp_loss);
  out += ",\"l1\":";
  put_double(out, r.l1);
  out += ",\"modes\":";
  put_int<std::uint64_t>(out, r.modes);
  out += ",\"top100\":";
  put_double(out, r.top100);
  out += ",\"relative_mean_error\":";
  put_double(out, r.relative_mean_error);
  out += ",\"hamming_modes\":";
  put_int(out, r.hamming_modes);
  out += ",\"wall_ms\":";
  put_double(out, r.wall_ms);
  out += ",\"seed\":";
  put_int<std::uint64_t>(out, r.seed);
  out += '}';
  return out;
}

void emit_record(std::ostream& sink, const MetricRecord& r) {
  sink << format_record(r) << '\n';
  if (!sink) throw Error("failed to write metric record");
}

MetricRecord parse_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed metric record: ") + e.what());
  }
  auto opt_double = [&](const char* key) -> std::optional<double> {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  try {
    MetricRecord r;
    r.round = j.at("round").get<int>();
    r.trajectories_seen = j.at("trajectories_seen").get<std::uint64_t>();
    r.loss = opt_double("loss").value_or(NAN);
    r.pbp_loss = opt_double("pbp_loss");
    r.l1 = opt_double("l1");
    r.modes = j.at("modes").get<std::uint64_t>();
    r.top100 = opt_double("top100").value_or(NAN);
    r.relative_mean_error = opt_double("relative_mean_error");
    if (!j.at("hamming_modes").is_null()) r.hamming_modes = j.at("hamming_modes").get<std::uint64_t>();
    r.wall_ms = opt_double("wall_ms").value_or(NAN);
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metric record: ") + e.what());
  }
}

}  // namespace gflowlab
