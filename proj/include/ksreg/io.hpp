#pragma once

// Text formats shared by the command-line front end: JSON documents whose
// floats are written with 17 significant digits, the series export, the
// encounter report and the trajectory CSV. Every writer has a parser with
// parse(write(x)) == x.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ksreg/canonical.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/hjsolver.hpp"

namespace ksreg {

using Json = nlohmann::ordered_json;

// Malformed input text (JSON, CSV or a numeric list).
class ParseError : public Error {
public:
    using Error::Error;
};

// "%.17g"; non-finite values as nan, inf, -inf.
std::string format_double(double x);

// Objects are written one key per line, arrays of scalars on one line.
// Floats use format_double; non-finite floats become null.
std::string dump_json(const Json& j);
Json parse_json(const std::string& text);

struct SeriesTerm {
    std::vector<int> exp;
    double val = 0.0;

    bool operator==(const SeriesTerm&) const = default;
};

// {"params": {...}, "order": N, "coeffs": [{"exp": [...], "val": v}, ...]}.
// Nonzero coefficients only, in graded-lex order.
struct SeriesDocument {
    Json params;
    int order = 0;
    int nvars = 4;
    std::vector<SeriesTerm> coeffs;

    bool operator==(const SeriesDocument&) const = default;
};

SeriesDocument series_document(const CompleteIntegral& ci);
SeriesDocument series_document(const PlanarHJSolution& sol);
SeriesDocument series_document(const Json& params, const Series& s);
Series to_series(const SeriesDocument& doc);
Json to_json(const SeriesDocument& doc);
SeriesDocument series_from_json(const Json& j);

Json to_json(const EncounterResult& r);
EncounterResult encounter_from_json(const Json& j);
Json to_json(const PlanarEncounterResult& r);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    bool operator==(const CsvTable& o) const;  // NaN compares equal to NaN
};

// Columns by system:
//   KS:        s,t,u1,u2,u3,u4,U1,U2,U3,U4,K,l,nu1,nu2,nu3,nu4
//   LeviCivita: s,t,u1,u2,U1,U2,K
//   Cartesian: t,X,Y,Z,PX,PY,PZ,H
// `nu` supplies the nu columns of a KS run (NaN where it returns nothing).
using NuColumn = std::function<std::optional<Vec4>(const KSState&)>;
CsvTable trajectory_table(const Trajectory& tr, const NuColumn& nu = {});
std::string to_csv(const CsvTable& t);
CsvTable csv_from_string(const std::string& text);
// {"columns": [...], "rows": [[...], ...]}.
Json to_json(const CsvTable& t);

// "a,b,c" with exactly `expected` entries (any count when expected < 0).
std::vector<double> parse_number_list(const std::string& text, int expected = -1);

}  // namespace ksreg
