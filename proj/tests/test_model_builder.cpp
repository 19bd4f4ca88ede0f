#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "gmbt/gherkin.hpp"
#include "gmbt/model.hpp"

using namespace gmbt;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Feature load_fixture(const std::string& name) {
    std::string path = std::string(GMBT_FIXTURE_DIR) + "/features/" + name;
    return parse_feature(read_file(path), path);
}

BuildReport build_one(const std::string& body) {
    Feature feature = parse_feature("Feature: F\n" + body, "t.feature");
    return build_model(feature.scenarios, ConventionConfig{}, feature.name);
}

}  // namespace

TEST_CASE("eHealth feature builds the two-state cycle") {
    Feature feature = load_fixture("ehealth.feature");
    BuildReport report = build_model(feature.scenarios, ConventionConfig{}, feature.name);

    CHECK(report.errors.empty());
    const Model& model = report.model;
    REQUIRE(model.states().size() == 2);
    CHECK(model.states()[0].name.canonical == "doctors landing page");
    CHECK(model.states()[0].name.display == "doctors landing page");
    CHECK(model.states()[0].is_start);
    CHECK(model.states()[1].name.canonical == "lab results page");
    CHECK(!model.states()[1].is_start);
    CHECK(model.start_states() == std::vector<std::string>{"doctors landing page"});

    REQUIRE(model.transitions().size() == 2);
    const Transition& t1 = model.transitions()[0];
    CHECK(t1.id == 1);
    CHECK(t1.origin == "doctors landing page");
    CHECK(t1.target == "lab results page");
    CHECK(t1.preconditions == std::vector<std::string>{"I have pending lab results"});
    CHECK(t1.actions == std::vector<std::string>{"I click on laboratory results"});
    CHECK(t1.postconditions ==
          std::vector<std::string>{"I should see my pending lab results"});
    CHECK(t1.provenance.scenario == "Navigate to lab results page");
    CHECK(t1.provenance.location.line == 2);

    const Transition& t2 = model.transitions()[1];
    CHECK(t2.id == 2);
    CHECK(t2.origin == "lab results page");
    CHECK(t2.target == "doctors landing page");
    CHECK(t2.preconditions.empty());
    CHECK(t2.actions == std::vector<std::string>{"I click on the myHealth logo"});
    CHECK(t2.postconditions.empty());
}

TEST_CASE("missing states produce NoStates errors") {
    SUBCASE("no origin") {
        auto report = build_one("Scenario: S\n  Given something\n  When I go\n"
                                "  Then I should be on the \"b\"\n");
        REQUIRE(report.errors.size() == 1);
        CHECK(report.errors[0].kind == BuildErrorKind::NoStates);
        CHECK(report.errors[0].message ==
              "Unable to extract states from test scenario 'S': no origin state");
        // A scenario that fails state extraction contributes nothing.
        CHECK(report.model.empty());
    }
    SUBCASE("no target") {
        auto report = build_one("Scenario: S\n  Given I am on the \"a\"\n  When I go\n"
                                "  Then something\n");
        REQUIRE(report.errors.size() == 1);
        CHECK(report.errors[0].message ==
              "Unable to extract states from test scenario 'S': no target state");
        CHECK(report.model.empty());
    }
    SUBCASE("neither") {
        auto report = build_one("Scenario: S\n  Given something\n  When I go\n"
                                "  Then something else\n");
        REQUIRE(report.errors.size() == 1);
        CHECK(report.errors[0].message ==
              "Unable to extract states from test scenario 'S': no origin or target state");
        CHECK(report.model.empty());
    }
}

TEST_CASE("a scenario without a When yields a NoTransition error") {
    auto report = build_one("Scenario: S\n  Given I am on the \"a\"\n"
                            "  Then I should be on the \"b\"\n");
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].kind == BuildErrorKind::NoTransition);
    CHECK(report.errors[0].message ==
          "Unable to extract transition from test scenario 'S': no When action");
    // States were already merged before the action check.
    CHECK(report.model.states().size() == 2);
    CHECK(report.model.transitions().empty());
}

TEST_CASE("errors do not stop the batch and ids skip failed scenarios") {
    auto report = build_one(
        "Scenario: ok one\n  Given I start on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n"
        "Scenario: broken\n  Given nothing here\n  When I go\n  Then nothing there\n"
        "Scenario: ok two\n  Given I am on the \"b\"\n  When I return\n"
        "  Then I should be on the \"a\"\n");
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].provenance.scenario == "broken");
    REQUIRE(report.model.transitions().size() == 2);
    CHECK(report.model.transitions()[0].id == 1);
    CHECK(report.model.transitions()[0].provenance.scenario == "ok one");
    CHECK(report.model.transitions()[1].id == 2);
    CHECK(report.model.transitions()[1].provenance.scenario == "ok two");
}

TEST_CASE("states merge case and whitespace insensitively") {
    auto report = build_one(
        "Scenario: one\n  Given I start on the \"Landing  Page\"\n  When I go\n"
        "  Then I should be on the \"settings page\"\n"
        "Scenario: two\n  Given I am on the \"landing page\"\n  When I leave\n"
        "  Then I should be on the \" LANDING   PAGE \"\n");
    CHECK(report.errors.empty());
    REQUIRE(report.model.states().size() == 2);
    // First-seen spelling is kept for display; identity is canonical.
    CHECK(report.model.states()[0].name.display == "Landing Page");
    CHECK(report.model.states()[0].name.canonical == "landing page");
    CHECK(report.model.transitions()[1].origin == "landing page");
    CHECK(report.model.transitions()[1].target == "landing page");
}

TEST_CASE("the start flag is sticky across mentions") {
    auto report = build_one(
        "Scenario: one\n  Given I am on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n"
        "Scenario: two\n  Given I start on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n"
        "Scenario: three\n  Given I am on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n");
    CHECK(report.model.start_states() == std::vector<std::string>{"a"});
}

TEST_CASE("duplicate scenarios yield duplicate transitions") {
    auto report = build_one(
        "Scenario: again\n  Given I am on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n"
        "Scenario: again\n  Given I am on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n");
    CHECK(report.errors.empty());
    REQUIRE(report.model.transitions().size() == 2);
    Transition a = report.model.transitions()[0];
    Transition b = report.model.transitions()[1];
    CHECK(a.id != b.id);
    // Identical apart from identity and provenance.
    b.id = a.id;
    b.provenance = a.provenance;
    CHECK(a == b);
}

TEST_CASE("merge4 feature connects three pages") {
    Feature feature = load_fixture("merge4.feature");
    BuildReport report = build_model(feature.scenarios, ConventionConfig{}, feature.name);
    CHECK(report.errors.empty());
    CHECK(report.model.states().size() == 3);
    CHECK(report.model.transitions().size() == 4);
    CHECK(report.model.start_states() ==
          std::vector<std::string>{"doctors landing page"});
    // Every state is reachable from the start through the transition set.
    CHECK(report.model.outgoing("doctors landing page").size() == 2);
    CHECK(report.model.outgoing("patient details page").size() == 1);
    CHECK(report.model.outgoing("prescriptions page").size() == 1);
}

TEST_CASE("multi-step scenarios keep step order") {
    auto report = build_one(
        "Scenario: S\n"
        "  Given I am on the \"a\"\n"
        "  And the cart is empty\n"
        "  And the session is fresh\n"
        "  When I add an item\n"
        "  And I open the cart\n"
        "  Then I should be on the \"b\"\n"
        "  And the cart should show one item\n"
        "  And the total should update\n");
    REQUIRE(report.model.transitions().size() == 1);
    const Transition& t = report.model.transitions()[0];
    CHECK(t.preconditions ==
          std::vector<std::string>{"the cart is empty", "the session is fresh"});
    CHECK(t.actions == std::vector<std::string>{"I add an item", "I open the cart"});
    CHECK(t.postconditions == std::vector<std::string>{"the cart should show one item",
                                                       "the total should update"});
}

TEST_CASE("feature overload renumbers across files") {
    Feature f1 = parse_feature(
        "Feature: one\nScenario: a\n  Given I am on the \"x\"\n  When I go\n"
        "  Then I should be on the \"y\"\n", "one.feature");
    Feature f2 = parse_feature(
        "Feature: two\nScenario: b\n  Given I am on the \"y\"\n  When I return\n"
        "  Then I should be on the \"x\"\n", "two.feature");
    std::vector<Feature> features{f1, f2};
    BuildReport report = build_model(features, ConventionConfig{});
    REQUIRE(report.model.transitions().size() == 2);
    CHECK(report.model.transitions()[0].id == 1);
    CHECK(report.model.transitions()[0].provenance.feature == "one");
    CHECK(report.model.transitions()[1].id == 2);
    CHECK(report.model.transitions()[1].provenance.feature == "two");
}

TEST_CASE("extraction helpers") {
    Feature feature = parse_feature(
        "Feature: F\nScenario: S\n"
        "  Given I start on the \"home\"\n"
        "  And the light is green\n"
        "  When I drive\n"
        "  Then I should go to the \"work\"\n"
        "  And I should be tired\n", "t.feature");
    const Scenario& s = feature.scenarios[0];
    ConventionConfig config;

    auto origin = extract_origin_state(s, config);
    REQUIRE(origin.has_value());
    CHECK(origin->name.canonical == "home");
    CHECK(origin->is_start);

    auto target = extract_target_state(s, config);
    REQUIRE(target.has_value());
    CHECK(target->canonical == "work");

    CHECK(extract_preconditions(s, config) == std::vector<std::string>{"the light is green"});
    CHECK(extract_actions(s) == std::vector<std::string>{"I drive"});
    CHECK(extract_postconditions(s, config) ==
          std::vector<std::string>{"I should be tired"});
}

TEST_CASE("StateName::from_raw") {
    StateName name = StateName::from_raw("  Lab   RESULTS page ");
    CHECK(name.display == "Lab RESULTS page");
    CHECK(name.canonical == "lab results page");
}

TEST_CASE("Model mutators validate their input") {
    Model model;
    model.add_state(StateName::from_raw("a"), true);
    model.add_state(StateName::from_raw("b"));

    Transition t;
    t.id = 1;
    t.origin = "a";
    t.target = "b";
    t.actions = {"go"};
    model.add_transition(t);

    SUBCASE("duplicate id") {
        Transition dup = t;
        CHECK_THROWS_AS(model.add_transition(dup), std::invalid_argument);
    }
    SUBCASE("unknown endpoint") {
        Transition bad = t;
        bad.id = 2;
        bad.target = "missing";
        CHECK_THROWS_AS(model.add_transition(bad), std::invalid_argument);
    }
    SUBCASE("nonpositive id") {
        Transition bad = t;
        bad.id = 0;
        CHECK_THROWS_AS(model.add_transition(bad), std::invalid_argument);
    }
    SUBCASE("empty actions") {
        Transition bad = t;
        bad.id = 2;
        bad.actions.clear();
        CHECK_THROWS_AS(model.add_transition(bad), std::invalid_argument);
    }
}

TEST_CASE("outgoing returns ascending ids") {
    Model model;
    model.add_state(StateName::from_raw("a"), true);
    model.add_state(StateName::from_raw("b"));
    for (int id : {3, 1, 2}) {
        Transition t;
        t.id = id;
        t.origin = "a";
        t.target = "b";
        t.actions = {"go"};
        model.add_transition(t);
    }
    CHECK(model.outgoing("a") == std::vector<int>{1, 2, 3});
    CHECK(model.outgoing("b").empty());
    CHECK(model.find_transition(2)->id == 2);
    CHECK(model.find_transition(9) == nullptr);
    CHECK(model.find_state("a")->is_start);
    CHECK(model.find_state("zzz") == nullptr);
}
