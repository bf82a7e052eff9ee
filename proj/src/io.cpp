#include "sprayer/io.hpp"

#include <fstream>

#include <fmt/format.h>

#ifndef SPRAYER_VERSION
#define SPRAYER_VERSION "unknown"
#endif

namespace sprayer {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path)
{
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError(fmt::format("cannot write '{}'", path.string()));
  }
  return out;
}

void write_sidecar(const std::filesystem::path& path, const Provenance& prov)
{
  nlohmann::ordered_json meta;
  meta["file"] = path.filename().string();
  meta["config_hash"] = prov.config_hash;
  meta["master_seed"] = prov.master_seed;
  meta["code_version"] = prov.code_version;
  auto out = open_for_write(path.string() + ".meta.json");
  out << meta.dump(2) << '\n';
}

void check_stream(const std::ofstream& out, const std::filesystem::path& path)
{
  if (!out) {
    throw IoError(fmt::format("write to '{}' failed", path.string()));
  }
}

}  // namespace

const char* code_version() { return SPRAYER_VERSION; }

std::string format_number(double x) { return fmt::format("{:.17g}", x); }

void write_csv(const std::filesystem::path& path,
               std::span<const CsvColumn> columns, const Provenance& prov)
{
  if (columns.empty()) {
    throw IoError("CSV needs at least one column");
  }
  const std::size_t rows = columns.front().values.size();
  for (const auto& c : columns) {
    if (c.values.size() != rows) {
      throw IoError(fmt::format("CSV column '{}' has {} rows, expected {}",
                                c.name, c.values.size(), rows));
    }
  }
  auto out = open_for_write(path);
  fmt::memory_buffer buf;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    fmt::format_to(std::back_inserter(buf), "{}{}", j ? "," : "", columns[j].name);
  }
  buf.push_back('\n');
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      fmt::format_to(std::back_inserter(buf), "{}{:.17g}", j ? "," : "",
                     columns[j].values[i]);
    }
    buf.push_back('\n');
    if (buf.size() > (1u << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
  write_sidecar(path, prov);
}

void write_ndjson(const std::filesystem::path& path,
                  std::span<const nlohmann::ordered_json> records,
                  const Provenance& prov)
{
  auto out = open_for_write(path);
  for (const auto& r : records) {
    out << r.dump() << '\n';
  }
  check_stream(out, path);
  write_sidecar(path, prov);
}

void write_json(const std::filesystem::path& path,
                const nlohmann::ordered_json& doc, const Provenance& prov)
{
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
  check_stream(out, path);
  write_sidecar(path, prov);
}

}  // namespace sprayer
