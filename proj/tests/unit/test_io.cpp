#include "doctest.h"

#include <sstream>

#include <bchar/io.hpp>
#include <bchar/mesh.hpp>

using namespace bchar;

TEST_CASE("config parsing") {
    std::istringstream in(
        "# comment\n"
        "case = tc1_2d\n"
        "dt=0.8\n"
        "\n"
        "balls = 2x2 # trailing comment\n");
    const auto kv = parse_config(in);
    REQUIRE(kv.size() == 3);
    CHECK(kv.at("case") == "tc1_2d");
    CHECK(kv.at("dt") == "0.8");
    CHECK(kv.at("balls") == "2x2");
}

TEST_CASE("config parsing rejects malformed lines") {
    std::istringstream in("this line has no equals sign\n");
    CHECK_THROWS_AS(parse_config(in), Error);
}

TEST_CASE("field csv layout 2D") {
    const Mesh<2> mesh({{0, 0}, {1, 1}, {2, 2}}, 1.0);
    ConcentrationField c;
    c.values = {0.0, 1.0, 2.0, 3.0};
    std::ostringstream out;
    write_field_csv(out, mesh, c);
    std::istringstream lines(out.str());
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header == "i,j,x,y,c");
    CHECK(first.substr(0, 4) == "0,0,");
}

TEST_CASE("diagnostics csv includes conservation columns") {
    std::ostringstream out;
    StepDiagnostics sd;
    sd.step = 1;
    write_diagnostics_csv(out, {sd});
    const auto text = out.str();
    CHECK(text.find("mass_drift") != std::string::npos);
    CHECK(text.find("outflow") != std::string::npos);
}

TEST_CASE("vtk header for a 3D field") {
    const Mesh<3> mesh({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}, 1.0);
    ConcentrationField c;
    c.values.assign(8, 0.5);
    std::ostringstream out;
    write_vtk(out, mesh, c, "concentration");
    const auto text = out.str();
    CHECK(text.find("STRUCTURED_POINTS") != std::string::npos);
    CHECK(text.find("CELL_DATA 8") != std::string::npos);
}
