#include "mmw/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mmw/error.hpp"
#include "text.hpp"

namespace mmw {

namespace {

namespace pt = boost::property_tree;

struct Field {
    const char* key;
    std::function<std::string()> get;
    std::function<bool(const std::string&)> set;
};

Field num(const char* key, double& ref) {
    return {key, [&ref] { return detail::fmt_num(ref); },
            [&ref](const std::string& v) { return detail::parse_num(v, ref); }};
}

Field integer(const char* key, int& ref) {
    return {key, [&ref] { return std::to_string(ref); },
            [&ref](const std::string& v) {
                double d = 0.0;
                if (!detail::parse_num(v, d) || d != static_cast<int>(d)) return false;
                ref = static_cast<int>(d);
                return true;
            }};
}

Field flag(const char* key, bool& ref) {
    return {key, [&ref] { return std::string(ref ? "true" : "false"); },
            [&ref](const std::string& v) {
                if (v == "true" || v == "1" || v == "yes") ref = true;
                else if (v == "false" || v == "0" || v == "no") ref = false;
                else return false;
                return true;
            }};
}

std::string array_text(const ArrayGeometry& g) {
    return std::to_string(g.n_horizontal) + "x" + std::to_string(g.n_vertical);
}

std::vector<Field> band_fields(BandParameters& b) {
    return {
        {"name", [&b] { return b.name; }, [&b](const std::string& v) { b.name = v; return true; }},
        num("carrier_freq", b.carrier_freq),
        num("nlos_alpha", b.nlos_alpha),
        num("nlos_beta", b.nlos_beta),
        num("nlos_sigma", b.nlos_sigma),
        num("los_alpha", b.los_alpha),
        num("los_beta", b.los_beta),
        num("los_sigma", b.los_sigma),
        num("lambda_k", b.lambda_k),
        num("r_tau", b.r_tau),
        num("zeta", b.zeta),
        num("bs_az_spread_mean", b.bs_az_spread_mean),
        num("bs_el_spread_mean", b.bs_el_spread_mean),
        num("ue_az_spread_mean", b.ue_az_spread_mean),
        num("ue_el_spread_mean", b.ue_el_spread_mean),
        num("a_out", b.a_out),
        num("b_out", b.b_out),
        num("a_los", b.a_los),
    };
}

std::vector<Field> network_fields(NetworkConfig& c) {
    auto array_field = [](const char* key, ArrayGeometry& g) {
        return Field{key, [&g] { return array_text(g); },
                     [&g](const std::string& v) {
                         try {
                             g = parse_array(v, g);
                         } catch (const Error&) {
                             return false;
                         }
                         return true;
                     }};
    };
    return {
        num("area_width", c.area_width),
        num("area_height", c.area_height),
        num("isd", c.isd),
        integer("sectors_per_site", c.sectors_per_site),
        integer("ues_per_cell", c.ues_per_cell),
        num("dl_tx_power", c.dl_tx_power),
        num("ul_tx_power", c.ul_tx_power),
        num("bs_noise_figure", c.bs_noise_figure),
        num("ue_noise_figure", c.ue_noise_figure),
        num("bandwidth", c.bandwidth),
        num("overhead", c.overhead),
        num("duplex_split", c.duplex_split),
        num("delta", c.delta),
        num("rho_max", c.rho_max),
        array_field("bs_array", c.bs_array),
        {"bs_downtilt_deg", [&c] { return detail::fmt_num(rad2deg(c.bs_array.downtilt)); },
         [&c](const std::string& v) {
             double d = 0.0;
             if (!detail::parse_num(v, d)) return false;
             c.bs_array.downtilt = deg2rad(d);
             return true;
         }},
        num("bs_element_spacing", c.bs_array.element_spacing),
        array_field("ue_array", c.ue_array),
        num("ue_element_spacing", c.ue_array.element_spacing),
        num("d_shift", c.d_shift),
        flag("suppress_los", c.suppress_los),
        {"force_state",
         [&c] { return c.force_state ? std::string(1, state_letter(*c.force_state)) : std::string("none"); },
         [&c](const std::string& v) {
             if (v == "none") {
                 c.force_state.reset();
                 return true;
             }
             if (v.size() != 1 || (v[0] != 'L' && v[0] != 'N' && v[0] != 'O')) return false;
             c.force_state = state_from_letter(v[0]);
             return true;
         }},
        num("bs_height", c.bs_height),
        num("ue_height", c.ue_height),
        integer("subpaths_per_cluster", c.subpaths_per_cluster),
        integer("slot_draws", c.slot_draws),
        num("interior_margin_isd", c.interior_margin_isd),
        flag("ul_noise_per_share", c.ul_noise_per_share),
    };
}

void apply_section(const pt::ptree& section, std::vector<Field> fields, const std::string& source,
                   const std::string& name, const char* skip = nullptr) {
    for (const auto& [key, value] : section) {
        if (skip && key == skip) continue;
        auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return key == f.key; });
        if (it == fields.end()) fail(ErrorCode::Parse, source + ": unknown key '" + key + "' in [" + name + "]");
        const std::string v = std::string(detail::trim(value.data()));
        if (!it->set(v)) fail(ErrorCode::Parse, source + ": bad value '" + v + "' for " + key);
    }
}

std::string section_text(const char* name, const std::vector<Field>& fields) {
    std::ostringstream out;
    out << '[' << name << "]\n";
    for (const auto& f : fields) out << f.key << " = " << f.get() << '\n';
    return out.str();
}

}  // namespace

ArrayGeometry parse_array(const std::string& text, const ArrayGeometry& base) {
    const auto x = text.find_first_of("xX");
    ArrayGeometry g = base;
    double h = 0.0, v = 0.0;
    if (x == std::string::npos || !detail::parse_num(text.substr(0, x), h) ||
        !detail::parse_num(text.substr(x + 1), v) || h < 1 || v < 1 || h != static_cast<int>(h) ||
        v != static_cast<int>(v))
        fail(ErrorCode::InvalidArgument, "array must be given as HxV, got '" + text + "'");
    g.n_horizontal = static_cast<int>(h);
    g.n_vertical = static_cast<int>(v);
    return g;
}

double band_field(const BandParameters& band, const std::string& key) {
    BandParameters copy = band;
    for (const auto& f : band_fields(copy)) {
        if (key != f.key || key == "name") continue;
        double v = 0.0;
        detail::parse_num(f.get(), v);
        return v;
    }
    fail(ErrorCode::InvalidArgument, "unknown numeric band field '" + key + "'");
}

void set_band_field(BandParameters& band, const std::string& key, double value) {
    for (const auto& f : band_fields(band)) {
        if (key != f.key || key == "name") continue;
        f.set(detail::fmt_num(value));
        return;
    }
    fail(ErrorCode::InvalidArgument, "unknown numeric band field '" + key + "'");
}

ConfigFile parse_config(const std::string& text, const std::string& source) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorCode::Parse, source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    ConfigFile cfg;
    for (const auto& [name, section] : tree) {
        if (name == "BandParameters") {
            if (auto preset = section.get_optional<std::string>("preset"))
                cfg.band = band_preset(std::string(detail::trim(*preset)));
            apply_section(section, band_fields(cfg.band), source, name, "preset");
        } else if (name == "NetworkConfig") {
            apply_section(section, network_fields(cfg.network), source, name);
        } else {
            fail(ErrorCode::Parse, source + ": unknown section or key '" + name + "'");
        }
    }
    cfg.band.validate();
    cfg.network.band = cfg.band;
    cfg.network.validate();
    return cfg;
}

ConfigFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string band_to_text(const BandParameters& band) {
    BandParameters copy = band;
    return section_text("BandParameters", band_fields(copy));
}

std::string network_to_text(const NetworkConfig& cfg) {
    NetworkConfig copy = cfg;
    return section_text("NetworkConfig", network_fields(copy));
}

std::string config_to_text(const ConfigFile& cfg) { return band_to_text(cfg.band) + "\n" + network_to_text(cfg.network); }

void save_config(const std::string& path, const ConfigFile& cfg) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << config_to_text(cfg);
    if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

BandParameters resolve_band(const std::string& name_or_path) {
    for (const auto& n : band_preset_names())
        if (n == name_or_path) return band_preset(n);
    return load_config(name_or_path).band;
}

}  // namespace mmw
