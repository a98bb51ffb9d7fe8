#include <cmath>

#include <gtest/gtest.h>

#include "ksreg/io.hpp"

namespace ksreg {
namespace {

TEST(FormatDouble, SeventeenSignificantDigits) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(-2.0), "-2");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
    for (double x : {M_PI, 1e-300, 6.02214076e23, -1.0 / 3.0}) EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(Json, DumpUsesFixedDigitsAndNullForNonFinite) {
    Json j;
    j["a"] = 0.1;
    j["b"] = Json::array({1, 2.5, std::nan("")});
    j["c"] = {{"d", true}, {"e", "x\"y"}};
    const std::string text = dump_json(j);
    EXPECT_EQ(text, "{\n  \"a\": 0.10000000000000001,\n  \"b\": [1, 2.5, null],\n  \"c\": {\n    \"d\": true,\n"
                    "    \"e\": \"x\\\"y\"\n  }\n}\n");
    const Json back = parse_json(text);
    EXPECT_EQ(back["a"].get<double>(), 0.1);
    EXPECT_TRUE(back["b"][2].is_null());
    EXPECT_THROW(parse_json("{\"a\": "), ParseError);
}

TEST(SeriesDocument, RoundTripAndLinearTerm) {
    Params p;
    p.mu = 0.01;
    p.energy = -1.8;
    p.nu = Vec4(0.6, 0.0, 0.8, 0.0);
    const CompleteIntegral ci = complete_integral(p, 6);
    const SeriesDocument doc = series_document(ci);
    EXPECT_EQ(doc.order, 6);
    EXPECT_EQ(doc.nvars, 4);
    const SeriesDocument back = series_from_json(parse_json(dump_json(to_json(doc))));
    EXPECT_EQ(back, doc);
    const Series s = to_series(back);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_EQ(s[i], ci.w[i]);
    EXPECT_NEAR(s.coeff({1, 0, 0, 0}), std::sqrt(0.08) * 0.6, 1e-15);
    // Graded-lex order: degrees never decrease along the list.
    int last = 0;
    for (const auto& t : doc.coeffs) {
        const int d = t.exp[0] + t.exp[1] + t.exp[2] + t.exp[3];
        EXPECT_GE(d, last);
        last = d;
    }
}

TEST(SeriesDocument, PlanarExportHasTwoVariables) {
    const PlanarHJSolution sol = solve_planar(0.3, 0.0, -1.8, 0.01, 5);
    const SeriesDocument doc = series_document(sol);
    EXPECT_EQ(doc.nvars, 2);
    EXPECT_EQ(doc.params["alpha"].get<double>(), 0.3);
    const SeriesDocument back = series_from_json(parse_json(dump_json(to_json(doc))));
    EXPECT_EQ(back, doc);
    EXPECT_EQ(to_series(back).coeff({1, 0, 0, 0}), sol.w2.coeff({1, 0, 0, 0}));
}

TEST(SeriesDocument, RejectsMalformedInput) {
    EXPECT_THROW(series_from_json(parse_json("{\"order\": 2, \"coeffs\": []}")), ParseError);
    EXPECT_THROW(series_from_json(parse_json("{\"params\": {}, \"order\": 2.5, \"coeffs\": []}")), ParseError);
    const Json bad = parse_json(R"({"params": {}, "order": 2, "coeffs": [{"exp": [3,0,0,0], "val": 1}]})");
    EXPECT_THROW(to_series(series_from_json(bad)), ParseError);
}

TEST(EncounterJson, SchemaAndRoundTrip) {
    EncounterResult r;
    r.entry = PlanetoState{Vec3(1e-3, 0, 0), Vec3(-1.0 / 3.0, 0.2, 0.1)};
    r.exit = PlanetoState{Vec3(0, 1e-3, 0), Vec3(0.3, 0.2, -0.1)};
    r.nu0 = Vec4(0.5, 0.5, 0.5, 0.5);
    r.n0 = Vec4(1e-5, -2e-5, 3e-5, 0.1);
    r.s_exit = 0.123456789012345678;
    r.t_exit = 1e-4 / 3.0;
    r.diagnostics.nu_drift = 1e-13;
    r.diagnostics.newton_iters_max = 4;
    r.diagnostics.chart = Chart::MinusX;
    const Json j = to_json(r);
    for (const char* k : {"entry", "exit", "nu0", "n0", "s_exit", "t_exit", "diagnostics"}) EXPECT_TRUE(j.contains(k)) << k;
    for (const char* k : {"nu_drift", "energy_drift", "bilinear", "newton_iters_max"})
        EXPECT_TRUE(j["diagnostics"].contains(k)) << k;
    const EncounterResult b = encounter_from_json(parse_json(dump_json(j)));
    EXPECT_EQ(b.entry.packed(), r.entry.packed());
    EXPECT_EQ(b.exit.packed(), r.exit.packed());
    EXPECT_EQ(b.nu0, r.nu0);
    EXPECT_EQ(b.n0, r.n0);
    EXPECT_EQ(b.s_exit, r.s_exit);
    EXPECT_EQ(b.t_exit, r.t_exit);
    EXPECT_EQ(b.diagnostics.nu_drift, r.diagnostics.nu_drift);
    EXPECT_EQ(b.diagnostics.newton_iters_max, 4);
    EXPECT_EQ(b.diagnostics.chart, Chart::MinusX);
    EXPECT_THROW(encounter_from_json(parse_json(R"({"entry": [1, 2]})")), ParseError);
}

TEST(TrajectoryCsv, KsHeaderAndRoundTrip) {
    const PlanetoState x{Vec3(0.01, 0.005, -0.002), Vec3(0.3, 0.9, 0.1)};
    const double e = ham_planeto(x, 0.01);
    const Trajectory tr = integrate({HamiltonianId::KS, 0.01, e, true}, chart_lift(x).packed(), 0.2);
    int calls = 0;
    const CsvTable t = trajectory_table(tr, [&](const KSState&) -> std::optional<Vec4> {
        return calls++ % 2 ? std::optional<Vec4>(Vec4(1.0 / 3.0, 0, 0, 0)) : std::nullopt;
    });
    const std::vector<std::string> header{"s", "t", "u1", "u2", "u3", "u4", "U1", "U2", "U3", "U4", "K", "l",
                                          "nu1", "nu2", "nu3", "nu4"};
    EXPECT_EQ(t.header, header);
    ASSERT_EQ(t.rows.size(), tr.states.size());
    EXPECT_TRUE(std::isnan(t.rows[0][12]));
    EXPECT_EQ(t.rows[1][12], 1.0 / 3.0);
    const std::string text = to_csv(t);
    EXPECT_EQ(text.substr(0, text.find('\n')), "s,t,u1,u2,u3,u4,U1,U2,U3,U4,K,l,nu1,nu2,nu3,nu4");
    EXPECT_EQ(csv_from_string(text), t);
}

TEST(TrajectoryCsv, CartesianHeader) {
    const PlanetoState x{Vec3(0.05, 0, 0), Vec3(0, 0.4, 0)};
    const Trajectory tr = integrate({HamiltonianId::Planetocentric, 0.01, -1.8, true}, x.packed(), 0.1);
    const CsvTable t = trajectory_table(tr);
    EXPECT_EQ(t.header, (std::vector<std::string>{"t", "X", "Y", "Z", "PX", "PY", "PZ", "H"}));
    EXPECT_EQ(t.rows.front()[1], 0.05);
    EXPECT_EQ(csv_from_string(to_csv(t)), t);
    const Json j = to_json(t);
    EXPECT_EQ(j["rows"].size(), t.rows.size());
}

TEST(TrajectoryCsv, RejectsRaggedRows) {
    EXPECT_THROW(csv_from_string("a,b\n1,2\n3\n"), ParseError);
    EXPECT_THROW(csv_from_string("a,b\n1,zz\n"), ParseError);
    EXPECT_THROW(csv_from_string(""), ParseError);
}

TEST(NumberList, CountAndSyntax) {
    EXPECT_EQ(parse_number_list("1, -2.5e-3,+4", 3), (std::vector<double>{1, -2.5e-3, 4}));
    EXPECT_THROW(parse_number_list("1,2", 3), ParseError);
    EXPECT_THROW(parse_number_list("1,,2"), ParseError);
    EXPECT_THROW(parse_number_list("1,2x"), ParseError);
}

}  // namespace
}  // namespace ksreg
