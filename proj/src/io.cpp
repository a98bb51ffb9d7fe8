#include "ksreg/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ksreg {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

void dump_scalar(const Json& j, std::string& out) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_double(v) : "null";
    } else {
        out += j.dump();
    }
}

void dump_value(const Json& j, int indent, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad + Json(it.key()).dump() + ": ";
            dump_value(it.value(), indent + 2, out);
        }
        out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "}";
    } else if (j.is_array()) {
        bool flat = true;
        for (const auto& e : j) flat = flat && is_scalar(e);
        if (flat) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                dump_scalar(j[i], out);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            dump_value(j[i], indent + 2, out);
        }
        out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "]";
    } else {
        dump_scalar(j, out);
    }
}

double num(const Json& j) {
    if (j.is_null()) return std::nan("");
    if (!j.is_number()) throw ParseError("expected a number, got " + j.dump());
    return j.get<double>();
}

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const Json& j, const char* key) {
    const Json& a = field(j, key);
    if (!a.is_array() || a.size() != static_cast<std::size_t>(N))
        throw ParseError(std::string("field \"") + key + "\" must be an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = num(a[static_cast<std::size_t>(i)]);
    return v;
}

template <class V>
Json array(const V& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json diagnostics_json(const EncounterDiagnostics& d) {
    Json j;
    j["nu_drift"] = d.nu_drift;
    j["energy_drift"] = d.energy_drift;
    j["bilinear"] = d.bilinear;
    j["newton_iters_max"] = d.newton_iters_max;
    j["steps"] = d.steps;
    j["transit"] = d.transit;
    j["trusted_radius"] = d.trusted_radius;
    j["max_u_norm"] = d.max_u_norm;
    j["chart"] = to_string(d.chart);
    return j;
}

double parse_double(std::string_view tok) {
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\r')) tok.remove_suffix(1);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("not a number: \"" + std::string(tok) + "\"");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t k = s.find(sep, start);
        parts.push_back(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
        if (k == std::string_view::npos) break;
        start = k + 1;
    }
    return parts;
}

}  // namespace

std::string dump_json(const Json& j) {
    std::string out;
    dump_value(j, 0, out);
    out += "\n";
    return out;
}

Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

SeriesDocument series_document(const Json& params, const Series& s) {
    SeriesDocument d;
    d.params = params;
    d.order = s.order();
    d.nvars = s.nvars();
    const auto& lay = s.layout();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 0.0) continue;
        const Exponents& e = lay.exponents(i);
        d.coeffs.push_back({std::vector<int>(e.begin(), e.begin() + s.nvars()), s[i]});
    }
    return d;
}

SeriesDocument series_document(const CompleteIntegral& ci) {
    Json p;
    p["mu"] = ci.params.mu;
    p["E"] = ci.params.energy;
    p["kappa"] = ci.params.kappa;
    p["nu"] = array(ci.params.nu);
    return series_document(p, ci.w);
}

SeriesDocument series_document(const PlanarHJSolution& sol) {
    Json p;
    p["mu"] = sol.mu;
    p["E"] = sol.energy;
    p["kappa"] = sol.kappa;
    p["alpha"] = sol.alpha;
    return series_document(p, sol.w2);
}

Series to_series(const SeriesDocument& doc) {
    Series s(doc.nvars, doc.order);
    for (const SeriesTerm& t : doc.coeffs) {
        if (t.exp.size() != static_cast<std::size_t>(doc.nvars)) throw ParseError("series term with wrong exponent length");
        Exponents e{};
        for (std::size_t i = 0; i < t.exp.size(); ++i) {
            if (t.exp[i] < 0 || t.exp[i] > kMaxOrder) throw ParseError("series exponent out of range");
            e[i] = static_cast<std::uint8_t>(t.exp[i]);
        }
        try {
            s.set_coeff(e, t.val);
        } catch (const DimensionError&) {
            throw ParseError("series term exceeds the declared order");
        }
    }
    return s;
}

Json to_json(const SeriesDocument& doc) {
    Json j;
    j["params"] = doc.params;
    j["order"] = doc.order;
    Json c = Json::array();
    for (const SeriesTerm& t : doc.coeffs) {
        Json term;
        term["exp"] = t.exp;
        term["val"] = t.val;
        c.push_back(std::move(term));
    }
    j["coeffs"] = std::move(c);
    return j;
}

SeriesDocument series_from_json(const Json& j) {
    SeriesDocument d;
    d.params = field(j, "params");
    const Json& order = field(j, "order");
    if (!order.is_number_integer()) throw ParseError("\"order\" must be an integer");
    d.order = order.get<int>();
    const Json& c = field(j, "coeffs");
    if (!c.is_array()) throw ParseError("\"coeffs\" must be an array");
    d.nvars = c.empty() ? 4 : static_cast<int>(field(c[0], "exp").size());
    for (const Json& t : c) {
        const Json& e = field(t, "exp");
        if (!e.is_array()) throw ParseError("\"exp\" must be an array");
        SeriesTerm term;
        for (const Json& k : e) {
            if (!k.is_number_integer()) throw ParseError("exponents must be integers");
            term.exp.push_back(k.get<int>());
        }
        if (term.exp.size() != static_cast<std::size_t>(d.nvars)) throw ParseError("inconsistent exponent lengths");
        term.val = num(field(t, "val"));
        d.coeffs.push_back(std::move(term));
    }
    return d;
}

Json to_json(const EncounterResult& r) {
    Json j;
    j["entry"] = array(r.entry.packed());
    j["exit"] = array(r.exit.packed());
    j["nu0"] = array(r.nu0);
    j["n0"] = array(r.n0);
    j["s_exit"] = r.s_exit;
    j["t_exit"] = r.t_exit;
    j["diagnostics"] = diagnostics_json(r.diagnostics);
    return j;
}

Json to_json(const PlanarEncounterResult& r) {
    Json j;
    j["entry"] = array(r.entry.packed());
    j["exit"] = array(r.exit.packed());
    j["alpha"] = r.alpha;
    j["kappa"] = r.kappa;
    j["n0"] = array(r.n0);
    j["s_exit"] = r.s_exit;
    j["t_exit"] = r.t_exit;
    j["diagnostics"] = diagnostics_json(r.diagnostics);
    return j;
}

EncounterResult encounter_from_json(const Json& j) {
    EncounterResult r;
    r.entry = PlanetoState::unpack(vec<6>(j, "entry"));
    r.exit = PlanetoState::unpack(vec<6>(j, "exit"));
    r.nu0 = vec<4>(j, "nu0");
    r.n0 = vec<4>(j, "n0");
    r.s_exit = num(field(j, "s_exit"));
    r.t_exit = num(field(j, "t_exit"));
    const Json& d = field(j, "diagnostics");
    r.diagnostics.nu_drift = num(field(d, "nu_drift"));
    r.diagnostics.energy_drift = num(field(d, "energy_drift"));
    r.diagnostics.bilinear = num(field(d, "bilinear"));
    r.diagnostics.newton_iters_max = field(d, "newton_iters_max").get<int>();
    if (d.contains("steps")) r.diagnostics.steps = d.at("steps").get<long>();
    if (d.contains("transit")) r.diagnostics.transit = d.at("transit").get<bool>();
    if (d.contains("trusted_radius")) r.diagnostics.trusted_radius = num(d.at("trusted_radius"));
    if (d.contains("max_u_norm")) r.diagnostics.max_u_norm = num(d.at("max_u_norm"));
    if (d.contains("chart")) {
        const std::string c = d.at("chart").get<std::string>();
        if (c == to_string(Chart::PlusX)) r.diagnostics.chart = Chart::PlusX;
        else if (c == to_string(Chart::MinusX)) r.diagnostics.chart = Chart::MinusX;
        else throw ParseError("unknown chart \"" + c + "\"");
    }
    return r;
}

bool CsvTable::operator==(const CsvTable& o) const {
    if (header != o.header || rows.size() != o.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != o.rows[i].size()) return false;
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            const double a = rows[i][k], b = o.rows[i][k];
            if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
        }
    }
    return true;
}

CsvTable trajectory_table(const Trajectory& tr, const NuColumn& nu) {
    CsvTable t;
    const double nan = std::nan("");
    switch (tr.id) {
        case HamiltonianId::KS:
            t.header = {"s", "t", "u1", "u2", "u3", "u4", "U1", "U2", "U3", "U4", "K", "l", "nu1", "nu2", "nu3", "nu4"};
            break;
        case HamiltonianId::LeviCivita:
            t.header = {"s", "t", "u1", "u2", "U1", "U2", "K"};
            break;
        default:
            t.header = {"t", "X", "Y", "Z", "PX", "PY", "PZ", "H"};
    }
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        const VecX& y = tr.states[i];
        std::vector<double> row;
        if (is_regularized(tr.id)) row.push_back(tr.x[i]);
        row.push_back(tr.t[i]);
        const int dim = state_dimension(tr.id);
        for (int k = 0; k < dim; ++k) row.push_back(y[k]);
        row.push_back(tr.energy[i]);
        if (tr.id == HamiltonianId::KS) {
            row.push_back(tr.bilinear[i]);
            const std::optional<Vec4> v = nu ? nu(KSState::unpack(y.head<8>())) : std::nullopt;
            for (int k = 0; k < 4; ++k) row.push_back(v ? (*v)[k] : nan);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string to_csv(const CsvTable& t) {
    std::string out;
    for (std::size_t k = 0; k < t.header.size(); ++k) out += (k ? "," : "") + t.header[k];
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ",";
            out += format_double(row[k]);
        }
        out += "\n";
    }
    return out;
}

CsvTable csv_from_string(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (auto h : split(line, ',')) t.header.emplace_back(h);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto parts = split(line, ',');
        if (parts.size() != t.header.size())
            throw ParseError("CSV row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(parts.size()) +
                             " fields, header has " + std::to_string(t.header.size()));
        std::vector<double> row;
        for (auto p : parts) row.push_back(parse_double(p));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Json to_json(const CsvTable& t) {
    Json j;
    j["columns"] = t.header;
    Json rows = Json::array();
    for (const auto& r : t.rows) rows.push_back(r);
    j["rows"] = std::move(rows);
    return j;
}

std::vector<double> parse_number_list(const std::string& text, int expected) {
    std::vector<double> v;
    for (auto p : split(text, ',')) v.push_back(parse_double(p));
    if (expected >= 0 && v.size() != static_cast<std::size_t>(expected))
        throw ParseError("expected " + std::to_string(expected) + " comma-separated numbers, got " +
                         std::to_string(v.size()) + " in \"" + text + "\"");
    return v;
}

}  // namespace ksreg
