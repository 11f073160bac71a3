#include "tomoboost/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

namespace tomoboost {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail("write failed: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(float))
    fail(path.string() + ": expected " + std::to_string(expected * sizeof(float)) +
         " bytes, found " + std::to_string(bytes));
  in.seekg(0);
  std::vector<float> data(expected);
  in.read(reinterpret_cast<char*>(data.data()), std::streamsize(bytes));
  if (!in && expected > 0) fail("read failed: " + path.string());
  return data;
}

void write_f32(const std::vector<float>& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            std::streamsize(data.size() * sizeof(float)));
  if (!out) fail("write failed: " + path.string());
}

std::filesystem::path channel_path(const std::filesystem::path& dir, int baseline, Pol pol) {
  return dir / ("b" + std::to_string(baseline) + "_p" + pol_name(pol) + ".cf32");
}

constexpr Pol kPols[3] = {Pol::HH, Pol::HV, Pol::VV};

}  // namespace

SlcStack read_stack(const std::filesystem::path& dir) {
  json meta = read_json(dir / "meta.json");

  SlcStack stack;
  try {
    stack.geometry.wavelength = meta.at("wavelength_m").get<double>();
    stack.geometry.flight_height = meta.at("flight_height_m").get<double>();
    stack.geometry.incidence_angle = meta.at("incidence_rad").get<double>();
    stack.geometry.baselines = meta.at("baselines_m").get<std::vector<double>>();
    stack.rows = meta.at("rows").get<int>();
    stack.cols = meta.at("cols").get<int>();
    if (meta.contains("range_resolution_m"))
      stack.geometry.range_resolution = meta["range_resolution_m"].get<double>();
    if (meta.contains("azimuth_resolution_m"))
      stack.geometry.azimuth_resolution = meta["azimuth_resolution_m"].get<double>();
  } catch (const json::exception& e) {
    fail("bad stack descriptor " + (dir / "meta.json").string() + ": " + e.what());
  }
  stack.geometry.validate();
  require(stack.rows >= 0 && stack.cols >= 0, "stack descriptor: negative dimensions");

  const std::size_t pixels = std::size_t(stack.rows) * std::size_t(stack.cols);
  stack.channels.resize(stack.geometry.num_channels());
  for (int n = 0; n < stack.geometry.num_baselines(); ++n) {
    for (Pol pol : kPols) {
      auto path = channel_path(dir, n, pol);
      if (!std::filesystem::exists(path)) fail("missing channel file " + path.string());
      std::vector<float> raw = read_f32(path, pixels * 2);
      Eigen::MatrixXcd ch(stack.rows, stack.cols);
      for (int r = 0; r < stack.rows; ++r)
        for (int c = 0; c < stack.cols; ++c) {
          std::size_t k = 2 * (std::size_t(r) * stack.cols + c);
          ch(r, c) = std::complex<double>(raw[k], raw[k + 1]);
        }
      stack.channels[SlcStack::channel_index(n, pol)] = std::move(ch);
    }
  }
  stack.validate();
  return stack;
}

void write_stack(const SlcStack& stack, const std::filesystem::path& dir) {
  stack.validate();
  std::filesystem::create_directories(dir);

  json meta{{"wavelength_m", stack.geometry.wavelength},
            {"flight_height_m", stack.geometry.flight_height},
            {"incidence_rad", stack.geometry.incidence_angle},
            {"baselines_m", stack.geometry.baselines},
            {"rows", stack.rows},
            {"cols", stack.cols},
            {"range_resolution_m", stack.geometry.range_resolution},
            {"azimuth_resolution_m", stack.geometry.azimuth_resolution}};
  write_json(meta, dir / "meta.json");

  std::vector<float> raw(std::size_t(stack.rows) * stack.cols * 2);
  for (int n = 0; n < stack.geometry.num_baselines(); ++n) {
    for (Pol pol : kPols) {
      const auto& ch = stack.channel(n, pol);
      for (int r = 0; r < stack.rows; ++r)
        for (int c = 0; c < stack.cols; ++c) {
          std::size_t k = 2 * (std::size_t(r) * stack.cols + c);
          raw[k] = static_cast<float>(ch(r, c).real());
          raw[k + 1] = static_cast<float>(ch(r, c).imag());
        }
      write_f32(raw, channel_path(dir, n, pol));
    }
  }
}

HeightRaster read_raster(const std::filesystem::path& base) {
  json hdr = read_json(base.string() + ".hdr.json");

  HeightRaster raster;
  try {
    raster.rows = hdr.at("rows").get<int>();
    raster.cols = hdr.at("cols").get<int>();
    raster.kind = raster_kind_from_name(hdr.at("kind").get<std::string>());
    raster.valid_offset = hdr.at("valid_offset").get<int>();
  } catch (const json::exception& e) {
    fail("bad raster header " + base.string() + ".hdr.json: " + e.what());
  }

  std::vector<float> raw = read_f32(base.string() + ".f32",
                                    std::size_t(raster.rows) * raster.cols);
  raster.values.resize(raster.rows, raster.cols);
  for (int r = 0; r < raster.rows; ++r)
    for (int c = 0; c < raster.cols; ++c)
      raster.values(r, c) = raw[std::size_t(r) * raster.cols + c];
  raster.validate();
  return raster;
}

void write_raster(const HeightRaster& raster, const std::filesystem::path& base) {
  raster.validate();
  json hdr{{"rows", raster.rows},
           {"cols", raster.cols},
           {"kind", raster_kind_name(raster.kind)},
           {"valid_offset", raster.valid_offset}};
  write_json(hdr, base.string() + ".hdr.json");

  std::vector<float> raw(std::size_t(raster.rows) * raster.cols);
  for (int r = 0; r < raster.rows; ++r)
    for (int c = 0; c < raster.cols; ++c)
      raw[std::size_t(r) * raster.cols + c] = static_cast<float>(raster.values(r, c));
  write_f32(raw, base.string() + ".f32");
}

FeatureGrid read_feature_grid(const std::filesystem::path& base) {
  json hdr = read_json(base.string() + ".hdr.json");

  FeatureGrid grid;
  try {
    grid.rows = hdr.at("rows").get<int>();
    grid.cols = hdr.at("cols").get<int>();
    grid.dim = hdr.at("M").get<int>();
    grid.valid_offset = hdr.at("valid_offset").get<int>();
    grid.window = hdr.at("window").get<int>();
  } catch (const json::exception& e) {
    fail("bad feature grid header " + base.string() + ".hdr.json: " + e.what());
  }

  std::vector<float> raw =
      read_f32(base.string() + ".f32", std::size_t(grid.pixel_count()) * grid.dim);
  grid.values.resize(grid.pixel_count(), grid.dim);
  std::copy(raw.begin(), raw.end(), grid.values.data());
  grid.validate();
  return grid;
}

void write_feature_grid(const FeatureGrid& grid, const std::filesystem::path& base) {
  grid.validate();
  json hdr{{"rows", grid.rows},
           {"cols", grid.cols},
           {"M", grid.dim},
           {"valid_offset", grid.valid_offset},
           {"window", grid.window}};
  write_json(hdr, base.string() + ".hdr.json");

  std::vector<float> raw(grid.values.data(), grid.values.data() + grid.values.size());
  write_f32(raw, base.string() + ".f32");
}

void write_feature_grid_csv(const FeatureGrid& grid, const std::filesystem::path& file) {
  grid.validate();
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail("cannot write " + file.string());
  for (int f = 0; f < grid.dim; ++f) out << (f ? "," : "") << 'f' << f;
  out << '\n';
  out.precision(9);
  for (std::int64_t p = 0; p < grid.pixel_count(); ++p) {
    for (int f = 0; f < grid.dim; ++f) out << (f ? "," : "") << grid.values(p, f);
    out << '\n';
  }
  if (!out) fail("write failed: " + file.string());
}

}  // namespace tomoboost
