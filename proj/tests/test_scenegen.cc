#include "coopgot/errors.h"
#include "coopgot/scenegen.h"
#include "coopgot/visibility.h"
#include "doctest.h"
#include "support.h"

using namespace coopgot;
using namespace coopgot::testing;

TEST_SUITE("scenegen") {
  TEST_CASE("same config and seed give identical scenes") {
    const ScenarioConfig cfg;
    for (std::uint64_t seed : {1, 2, 77}) {
      CHECK(scene_to_json(generate_scene(cfg, seed)).dump() == scene_to_json(generate_scene(cfg, seed)).dump());
    }
    CHECK(scene_to_json(generate_scene(cfg, 1)).dump() != scene_to_json(generate_scene(cfg, 2)).dump());
  }

  TEST_CASE("empty traffic") {
    ScenarioConfig cfg;
    cfg.n_objects_min = cfg.n_objects_max = 0;
    cfg.occluder_prob = 0.0;
    const Scene s = generate_scene(cfg, 5);
    CHECK(s.cavs.size() == 2);
    CHECK(s.objects.empty());
    CHECK(validate_scene(s).ok());
  }

  TEST_CASE("generated scenes are valid and collision free") {
    const ScenarioConfig cfg;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      const Scene s = generate_scene(cfg, seed);
      INFO("seed " << seed);
      CHECK(validate_scene(s).ok());
      CHECK(ground_truth_collision_free(s));
      CHECK(s.seq_id == seq_id_for_seed(seed));
    }
  }

  TEST_CASE("occluder scenes contain occlusions") {
    ScenarioConfig cfg;
    cfg.occluder_prob = 1.0;
    int with_occlusion = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const Scene s = generate_scene(cfg, seed);
      bool any = false;
      for (double t : eligible_keyframes(s)) {
        for (const auto& cav : s.cavs) {
          for (const TrackedObject* a : s.agents()) {
            if (a->id == cav.id) continue;
            if (is_occluded(s, t, cav.id, a->id).occluded) any = true;
            if (any) break;
          }
          if (any) break;
        }
        if (any) break;
      }
      with_occlusion += any;
    }
    CHECK(with_occlusion >= 90);
  }

  TEST_CASE("eligible keyframes") {
    Scene s;
    s.duration = 20.0;
    auto k = eligible_keyframes(s);
    REQUIRE(k.size() == 34);
    CHECK(k.front() == doctest::Approx(0.5));
    CHECK(k.back() == doctest::Approx(17.0));
    s.duration = 6.0;
    k = eligible_keyframes(s);
    REQUIRE(k.size() == 6);
    CHECK(k.back() == doctest::Approx(3.0));
    s.duration = 3.4;
    CHECK(eligible_keyframes(s).empty());
  }

  TEST_CASE("validation flags a missing CAV") {
    Scene s = two_cav_scene();
    s.cavs.pop_back();
    CHECK(validate_scene(s).has("cav_count"));
  }

  TEST_CASE("validation agrees with polygon overlap oracle") {
    Rng rng(21);
    int hits = 0;
    for (int i = 0; i < 300; ++i) {
      Scene s = two_cav_scene(6.0);
      const Vec2 a{rng.uniform(20, 30), rng.uniform(-4, 4)};
      const Vec2 b{rng.uniform(20, 30), rng.uniform(-4, 4)};
      const double ya = rng.uniform(-3.14, 3.14), yb = rng.uniform(-3.14, 3.14);
      s.objects.push_back(parked("obj_a", a, ya, 6.0));
      s.objects.push_back(parked("obj_b", b, yb, 6.0));
      const bool want = polygons_intersect({{a.x, a.y, ya}, 4.5, 1.9}, {{b.x, b.y, yb}, 4.5, 1.9});
      const auto r = validate_scene(s);
      CHECK(r.has("interpenetration") == want);
      if (want) {
        ++hits;
        bool named = false;
        for (const auto& v : r.violations) {
          if (v.code == "interpenetration" && v.ids == std::vector<std::string>{"obj_a", "obj_b"}) named = true;
        }
        CHECK(named);
      }
    }
    CHECK(hits > 10);
  }

  TEST_CASE("bad scenario configs") {
    ScenarioConfig cfg;
    cfg.duration = 4.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = {};
    cfg.turn_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = {};
    cfg.n_objects_min = 5;
    cfg.n_objects_max = 2;
    CHECK_THROWS_AS(generate_scene(cfg, 1), InvalidConfig);
  }

  TEST_CASE("unsatisfiable occluder requirement") {
    ScenarioConfig cfg;
    cfg.n_objects_min = cfg.n_objects_max = 0;
    cfg.occluder_prob = 1.0;
    CHECK_THROWS_AS(generate_scene(cfg, 3), GenerationFailed);
  }

  TEST_CASE("scenario config json round trip") {
    ScenarioConfig cfg;
    cfg.n_objects_min = 2;
    cfg.n_objects_max = 4;
    cfg.turn_prob = 0.1;
    const auto back = scenario_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
  }
}
