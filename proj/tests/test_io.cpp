#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include <nbloch/io.hpp>

using namespace nbloch;

TEST_CASE("sig17 round-trips doubles exactly", "[io]") {
    const double samples[] = {0.0,
                              1.0,
                              -0.1,
                              1.0 / 3.0,
                              M_PI,
                              0.58 * M_PI,
                              1e-300,
                              6.02214076e23,
                              5e-324, // smallest denormal
                              std::numeric_limits<double>::max(),
                              -2.2250738585072014e-308};
    for (double v : samples) {
        INFO("v = " << v);
        const std::string s = io::sig17(v);
        CHECK(io::parse_double(s) == v);
    }
    CHECK(io::sig17(1.0) == "1");
    CHECK(io::sig17(0.1) == "0.10000000000000001");
}

TEST_CASE("parse_double rejects malformed fields", "[io]") {
    CHECK_THROWS_AS(io::parse_double("abc"), io_error);
    CHECK_THROWS_AS(io::parse_double("1.5x"), io_error);
    CHECK_THROWS_AS(io::parse_double(""), io_error);
    CHECK_THROWS_AS(io::parse_double("1e999"), io_error);
    CHECK(io::parse_double(" 1.5") == 1.5); // leading space is stod-accepted
}

TEST_CASE("csv write and read round trip", "[io]") {
    std::ostringstream os;
    io::write_csv_header(os, R"({"command":"demo","seed":42})",
                         {"theta1", "count", "flag", "label"});
    io::write_csv_row(os, {0.58 * M_PI, 123456789LL, true, "trivial"});
    io::write_csv_row(os, {-0.1, 0, false, "minus"});

    const auto doc = io::read_csv_string(os.str());
    CHECK(doc.metadata_json == R"({"command":"demo","seed":42})");
    REQUIRE(doc.columns ==
            std::vector<std::string>{"theta1", "count", "flag", "label"});
    REQUIRE(doc.rows.size() == 2);
    CHECK(io::parse_double(doc.rows[0][0]) == 0.58 * M_PI);
    CHECK(doc.rows[0][1] == "123456789");
    CHECK(doc.rows[0][2] == "1");
    CHECK(doc.rows[0][3] == "trivial");
    CHECK(doc.rows[1][2] == "0");
}

TEST_CASE("csv reader tolerates blanks, CRLF, and extra comments", "[io]") {
    const std::string text =
        "\n# {\"a\":1}\r\n"
        "x,y\r\n"
        "\n"
        "1,2\r\n"
        "# a stray comment between rows\n"
        "3,4\n";
    const auto doc = io::read_csv_string(text);
    CHECK(doc.metadata_json == "{\"a\":1}");
    REQUIRE(doc.rows.size() == 2);
    CHECK(doc.rows[1] == std::vector<std::string>{"3", "4"});
}

TEST_CASE("csv reader enforces field counts", "[io]") {
    CHECK_THROWS_AS(io::read_csv_string("x,y\n1,2,3\n"), io_error);
    CHECK_THROWS_AS(io::read_csv_string("x,y\n1\n"), io_error);
}

TEST_CASE("metadata must stay on one line", "[io]") {
    std::ostringstream os;
    CHECK_THROWS_AS(io::write_csv_header(os, "{\n}", {"x"}), io_error);
}

TEST_CASE("header without metadata still parses", "[io]") {
    const auto doc = io::read_csv_string("a,b\n5,6\n");
    CHECK(doc.metadata_json.empty());
    CHECK(doc.columns == std::vector<std::string>{"a", "b"});
    REQUIRE(doc.rows.size() == 1);
}
