#pragma once

#include <string>

#include "mmw/channel_model.hpp"
#include "mmw/netsim.hpp"

namespace mmw {

/// Contents of a parameter card. The file is flat key = value text grouped
/// under [BandParameters] and [NetworkConfig] headers; a `preset` key in the
/// band section starts from a built-in card before applying overrides.
struct ConfigFile {
    BandParameters band;
    NetworkConfig network;
};

ConfigFile parse_config(const std::string& text, const std::string& source = "<string>");
ConfigFile load_config(const std::string& path);

std::string band_to_text(const BandParameters& band);
std::string network_to_text(const NetworkConfig& cfg);
/// Both sections; parse_config(config_to_text(c)) reproduces c exactly.
std::string config_to_text(const ConfigFile& cfg);
void save_config(const std::string& path, const ConfigFile& cfg);

/// A preset name or a path to a card file.
BandParameters resolve_band(const std::string& name_or_path);

/// Numeric card fields by their key name; unknown keys throw InvalidArgument.
double band_field(const BandParameters& band, const std::string& key);
void set_band_field(BandParameters& band, const std::string& key, double value);

/// "HxV", e.g. "8x8".
ArrayGeometry parse_array(const std::string& text, const ArrayGeometry& base = {});

}  // namespace mmw
