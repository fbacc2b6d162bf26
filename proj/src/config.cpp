#include "sgnoma/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace sgnoma {

std::string to_string(CsiMode mode) { return mode == CsiMode::Exact ? "exact" : "estimated"; }

CsiMode parse_csi_mode(const std::string& name) {
    if (name == "exact") return CsiMode::Exact;
    if (name == "estimated") return CsiMode::Estimated;
    throw ConfigError("unknown csi mode: " + name);
}

namespace {

constexpr double kSpeedOfLight = 299792458.0;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": " + v);
    }
}

long long to_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": " + v);
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("bad seed for " + key + ": " + v);
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <class T, class F>
std::string join(const std::vector<T>& items, F f) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += f(items[i]);
    }
    return out;
}

}  // namespace

double SimulationConfig::max_doppler_hz() const {
    return f_max > 0.0 ? f_max : speed * carrier / kSpeedOfLight;
}

double SimulationConfig::max_doppler() const { return max_doppler_hz() * block_length() / chip_rate; }

PulseModel SimulationConfig::pulse_model() const { return PulseModel(parse_pulse_shape(pulse), pulse_support); }

void SimulationConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(M >= 2, "M must be at least 2");
    require(L_cp >= 1, "L_cp must be at least 1");
    require(L_cp < M, "L_cp must be smaller than M");
    require(J >= 1, "J must be at least 1");
    require(chip_rate > 0.0 && carrier > 0.0, "chip_rate and carrier must be positive");
    require(K_T >= 1, "K_T must be at least 1");
    require(delta_A >= 0.0 && delta_T >= 0.0 && tau_slope > 0.0, "delays must be non-negative and tau_slope positive");
    require(2.0 * delta_A < block_length(), "delta_A must stay below half a block");
    require(N_coh >= 2, "N_coh must be at least 2");
    require(Q_A >= 1 && Q_A <= M && Q_T >= 1 && Q_T <= M, "Q_A and Q_T must lie in 1..M");
    require(N_A_train >= 1 && N_T_train >= 1, "training lengths must be positive");
    require(N_A_train + N_T_train < N_coh, "training blocks leave no data blocks");
    require(data_blocks >= 0, "data_blocks must be non-negative");
    require(!snr_db.empty() && !atr_db.empty(), "snr_db and atr_db need at least one value");
    require(!detectors.empty() && !csi.empty(), "detectors and csi need at least one value");
    require(trials >= 1, "trials must be positive");
    require(min_errors >= 0, "min_errors must be non-negative");
    require(std::abs(max_doppler()) < 0.5, "normalized Doppler must stay below one half");
    const PulseModel p = pulse_model();
    require(within_cyclic_prefix(p, std::max(delta_A, delta_T), L_cp),
            "pulse support plus maximum delay exceeds the cyclic prefix");
}

std::map<std::string, std::string> SimulationConfig::entries() const {
    std::map<std::string, std::string> e;
    e["M"] = std::to_string(M);
    e["L_cp"] = std::to_string(L_cp);
    e["J"] = std::to_string(J);
    e["chip_rate"] = format_double(chip_rate);
    e["carrier"] = format_double(carrier);
    e["pulse"] = pulse;
    e["pulse_support"] = std::to_string(pulse_support);
    e["K_T"] = std::to_string(K_T);
    e["K_A_dB"] = format_double(K_A_dB);
    e["speed"] = format_double(speed);
    e["f_max"] = format_double(f_max);
    e["delta_A"] = format_double(delta_A);
    e["delta_T"] = format_double(delta_T);
    e["tau_slope"] = format_double(tau_slope);
    e["N_coh"] = std::to_string(N_coh);
    e["Q_A"] = std::to_string(Q_A);
    e["Q_T"] = std::to_string(Q_T);
    e["N_A_train"] = std::to_string(N_A_train);
    e["N_T_train"] = std::to_string(N_T_train);
    e["data_blocks"] = std::to_string(data_blocks);
    e["snr_db"] = join(snr_db, format_double);
    e["atr_db"] = join(atr_db, format_double);
    e["detectors"] = join(detectors, [](DetectorKind k) { return to_string(k); });
    e["csi"] = join(csi, [](CsiMode m) { return to_string(m); });
    e["trials"] = std::to_string(trials);
    e["min_errors"] = std::to_string(min_errors);
    e["seed"] = std::to_string(seed);
    return e;
}

std::string SimulationConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t SimulationConfig::hash() const {
    // FNV-1a over the canonical text without the run-length fields
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : entries()) {
        if (k == "trials" || k == "min_errors") continue;
        for (char c : k + "=" + v + "\n") {
            h ^= std::uint8_t(c);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void set_config_value(SimulationConfig& c, const std::string& key, const std::string& value) {
    using Setter = std::function<void(const std::string&)>;
    auto as_int = [&](int& field) { return Setter([&field, key](const std::string& v) { field = int(to_integer(key, v)); }); };
    auto as_double = [&](double& field) { return Setter([&field, key](const std::string& v) { field = to_double(key, v); }); };
    const std::map<std::string, Setter> setters = {
        {"M", as_int(c.M)},
        {"L_cp", as_int(c.L_cp)},
        {"J", as_int(c.J)},
        {"chip_rate", as_double(c.chip_rate)},
        {"carrier", as_double(c.carrier)},
        {"pulse", [&](const std::string& v) {
             parse_pulse_shape(v);
             c.pulse = v;
         }},
        {"pulse_support", as_int(c.pulse_support)},
        {"K_T", as_int(c.K_T)},
        {"K_A_dB", as_double(c.K_A_dB)},
        {"speed", as_double(c.speed)},
        {"f_max", as_double(c.f_max)},
        {"delta_A", as_double(c.delta_A)},
        {"delta_T", as_double(c.delta_T)},
        {"tau_slope", as_double(c.tau_slope)},
        {"N_coh", as_int(c.N_coh)},
        {"Q_A", as_int(c.Q_A)},
        {"Q_T", as_int(c.Q_T)},
        {"N_A_train", as_int(c.N_A_train)},
        {"N_T_train", as_int(c.N_T_train)},
        {"data_blocks", as_int(c.data_blocks)},
        {"snr_db", [&](const std::string& v) {
             c.snr_db.clear();
             for (const auto& s : split_list(v)) c.snr_db.push_back(to_double(key, s));
         }},
        {"atr_db", [&](const std::string& v) {
             c.atr_db.clear();
             for (const auto& s : split_list(v)) c.atr_db.push_back(to_double(key, s));
         }},
        {"detectors", [&](const std::string& v) {
             c.detectors.clear();
             for (const auto& s : split_list(v)) {
                 try {
                     c.detectors.push_back(parse_detector(s));
                 } catch (const std::invalid_argument& e) {
                     throw ConfigError(e.what());
                 }
             }
         }},
        {"csi", [&](const std::string& v) {
             c.csi.clear();
             for (const auto& s : split_list(v)) c.csi.push_back(parse_csi_mode(s));
         }},
        {"trials", as_int(c.trials)},
        {"min_errors", [&](const std::string& v) { c.min_errors = long(to_integer(key, v)); }},
        {"seed", [&](const std::string& v) { c.seed = to_u64(key, v); }},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key: " + key);
    try {
        it->second(value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

SimulationConfig parse_config(const std::string& text) {
    SimulationConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

SimulationConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

}  // namespace sgnoma
