#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sprayer {

/// Provenance written next to every data file. No timestamps or host
/// information, so identical runs produce identical bytes.
struct Provenance
{
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string code_version;
};

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct CsvColumn
{
  std::string name;
  std::span<const double> values;
};

/// Numbers are printed with 17 significant digits (round-trip exact).
/// Also writes `<path>.meta.json`.
void write_csv(const std::filesystem::path& path,
               std::span<const CsvColumn> columns, const Provenance& prov);

/// One JSON document per line, plus the sidecar.
void write_ndjson(const std::filesystem::path& path,
                  std::span<const nlohmann::ordered_json> records,
                  const Provenance& prov);

/// Pretty-printed JSON document, plus the sidecar.
void write_json(const std::filesystem::path& path,
                const nlohmann::ordered_json& doc, const Provenance& prov);

std::string format_number(double x);

const char* code_version();

}  // namespace sprayer
