#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <json.hpp>

#include "pathoquant/error.hpp"
#include "pathoquant/fixture.hpp"
#include "pathoquant/service/base64.hpp"
#include "pathoquant/service/webapp_service.hpp"
#include "support/test_support.hpp"

using namespace pq;
using nlohmann::json;
using pqtest::Bytes;

namespace {

struct WebHarness {
  explicit WebHarness(std::shared_ptr<Processor> processor = nullptr, std::int64_t ttl = 3600) {
    store = std::make_shared<LocalObjectStore>(dir / "store");
    std::filesystem::create_directories(dir / "samples");
    std::filesystem::create_directories(dir / "web");
    pqtest::write_file(dir / "web" / "index.html", std::string("<!doctype html><title>shell</title>"));
    pool = std::make_shared<JobPool>(2, 4);
    if (!processor) {
      processor = std::make_shared<InProcessProcessor>(
          std::make_shared<Pipeline>(std::make_shared<ReferenceBackend>()), pool);
    }
    WebAppOptions opt;
    opt.ttl_seconds = ttl;
    opt.sample_dir = dir / "samples";
    opt.web_root = dir / "web";
    opt.clock = [this] { return clock.load(); };
    service = std::make_unique<WebAppService>(store, processor, opt);
    port = service->bind("127.0.0.1", 0);
    service->start();
  }
  ~WebHarness() {
    service->stop();
    pool->shutdown();
  }

  httplib::Client client() const {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(120);
    return cli;
  }

  /// A client that has accepted the terms.
  httplib::Client session() {
    auto cli = client();
    const auto r = cli.Post("/terms/accept");
    REQUIRE(r->status == 200);
    const std::string cookie = r->get_header_value("Set-Cookie");
    cli.set_default_headers({{"Cookie", cookie.substr(0, cookie.find(';'))}});
    return cli;
  }

  pqtest::TempDir dir;
  std::shared_ptr<LocalObjectStore> store;
  std::shared_ptr<JobPool> pool;
  std::unique_ptr<WebAppService> service;
  std::atomic<std::int64_t> clock{1'700'000'000};
  int port = 0;
};

Bytes fixture_png(int total, int pos, std::uint64_t seed, int w = 192, int h = 160) {
  return encode_png(render_fixture(random_fixture_spec(total, pos, seed, {w, h, 5, 10, 10000})));
}

std::string upload(httplib::Client& cli, const Bytes& img) {
  const auto r = pqtest::post_image(cli, "/upload", img);
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return json::parse(r->body)["upload_id"];
}

json process(httplib::Client& cli, const std::string& upload_id, const std::string& extra = "") {
  const auto r = cli.Post("/process", json{{"upload_id", upload_id}}.dump() + extra, "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return json::parse(r->body);
}

Bytes download(httplib::Client& cli, const std::string& id) {
  const auto r = cli.Get("/download/" + id + ".zip");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "application/zip");
  return pqtest::as_bytes(r->body);
}

const pqtest::ZipMember& member(const std::vector<pqtest::ZipMember>& zip, const std::string& name) {
  for (const auto& m : zip) {
    if (m.name == name) return m;
  }
  FAIL("missing zip member " << name);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_SUITE("webapp") {

TEST_CASE("static shell and terms page") {
  WebHarness web;
  auto cli = web.client();
  const auto root = cli.Get("/");
  REQUIRE(root->status == 200);
  CHECK(root->body.find("shell") != std::string::npos);
  CHECK(root->get_header_value("Content-Type").starts_with("text/html"));
  const auto terms = cli.Get("/terms");
  REQUIRE(terms->status == 200);
  CHECK(terms->body.find("/terms/accept") != std::string::npos);
}

TEST_CASE("terms gate: 403 for API callers, 303 for browsers, open after accepting") {
  WebHarness web;
  auto cli = web.client();
  const auto png = fixture_png(2, 1, 1, 64, 64);
  const auto denied = pqtest::post_image(cli, "/upload", png);
  REQUIRE(denied->status == 403);
  CHECK(json::parse(denied->body)["error"] == "terms_not_accepted");

  httplib::Client browser("127.0.0.1", web.port);
  browser.set_default_headers({{"Accept", "text/html"}});
  const auto redirect = browser.Get("/sample/none.png");
  REQUIRE(redirect->status == 303);
  CHECK(redirect->get_header_value("Location") == "/terms");

  // A forged cookie is not a session.
  cli.set_default_headers({{"Cookie", std::string(kSessionCookie) + "=forged"}});
  CHECK(pqtest::post_image(cli, "/upload", png)->status == 403);

  auto ok = web.session();
  CHECK(pqtest::post_image(ok, "/upload", png)->status == 200);
  const auto again = ok.Post("/terms/accept");
  REQUIRE(again->status == 200);
  CHECK(again->get_header_value("Set-Cookie").find("Max-Age") == std::string::npos);
}

TEST_CASE("upload strips metadata and returns a thumbnail") {
  WebHarness web;
  auto cli = web.session();
  const auto img = pqtest::random_image(600, 300, 3);
  const auto r = pqtest::post_image(cli, "/upload", pqtest::write_jpeg(img, 95, true), "img", "a.jpg");
  REQUIRE(r->status == 200);
  const auto body = json::parse(r->body);
  CHECK(body["width"] == 600);
  CHECK(body["height"] == 300);
  const auto thumb = decode_image(base64_decode(body["thumbnail"].get<std::string>()), true);
  const int t = ImageLimits{}.thumbnail_max_dim;
  CHECK(thumb.width() == t);
  CHECK(thumb.height() == t / 2);

  const std::string id = body["upload_id"];
  const auto stored = web.store->get("uploads/" + id + "/original.png").bytes;
  for (const auto& c : pqtest::png_chunks(stored)) {
    CHECK((c == "IHDR" || c == "IDAT" || c == "IEND"));
  }
  const std::string raw = pqtest::as_string(stored);
  CHECK(raw.find("Exif") == std::string::npos);
  CHECK(raw.find("patient-id") == std::string::npos);
}

TEST_CASE("upload uses the full decoder and enforces limits") {
  WebHarness web;
  auto cli = web.session();
  const auto tif = pqtest::read_file(pqtest::data_path("rgb_lzw.tif"));
  CHECK(pqtest::post_image(cli, "/upload", tif, "img", "x.tif")->status == 200);
  const auto big = pqtest::post_image(cli, "/upload", encode_png(RasterImage(3001, 20)));
  REQUIRE(big->status == 413);
  CHECK(json::parse(big->body)["error"] == "image_too_large");
  const auto junk = pqtest::post_image(cli, "/upload", pqtest::as_bytes("hello world"));
  REQUIRE(junk->status == 400);
  CHECK(json::parse(junk->body)["error"] == "unsupported_format");
  CHECK(cli.Post("/upload", "x", "text/plain")->status == 400);
}

TEST_CASE("samples are listed and loaded through the upload path") {
  WebHarness web;
  pqtest::write_file(web.dir / "samples" / "b_sample.png", fixture_png(4, 2, 8, 64, 64));
  pqtest::write_file(web.dir / "samples" / "a_sample.png", fixture_png(3, 1, 9, 64, 64));
  pqtest::write_file(web.dir / "samples" / "notes.txt", std::string("ignored"));
  auto cli = web.session();
  const auto list = json::parse(web.client().Get("/samples")->body);
  CHECK(list["samples"] == json{"a_sample.png", "b_sample.png"});
  const auto r = cli.Get("/sample/a_sample.png");
  REQUIRE(r->status == 200);
  const auto body = json::parse(r->body);
  CHECK(body["width"] == 64);
  CHECK(process(cli, body["upload_id"])["scoring"]["num_total"] == 3);
  CHECK(cli.Get("/sample/missing.png")->status == 404);
  CHECK(cli.Get("/sample/..")->status == 404);
}

TEST_CASE("process: default 20x, fresh ids, identical scoring on repeat") {
  WebHarness web;
  auto cli = web.session();
  const std::string up = upload(cli, fixture_png(9, 4, 11));
  const auto a = process(cli, up);
  const auto b = process(cli, up);
  CHECK(a["result_id"] != b["result_id"]);
  CHECK(a["scoring"] == b["scoring"]);
  CHECK(a["scoring"]["num_total"] == 9);
  CHECK(a["scoring"]["num_pos"] == 4);
  std::set<std::string> names;
  for (auto it = a["thumbnails"].begin(); it != a["thumbnails"].end(); ++it) names.insert(it.key());
  CHECK(names == std::set<std::string>{"original", "hema", "dapi", "lap2", "marker", "seg", "overlay", "seg_raw"});

  const auto page = json::parse(cli.Get("/results/" + a["result_id"].get<std::string>())->body);
  CHECK(page["resolution"] == "20x");
  CHECK(page["upload_id"] == up);
  CHECK(page["width"] == 192);
  CHECK(page["params"]["seg_threshold"] == 0.5);
  CHECK(page["params"]["size_gate_min"] == 20);
}

TEST_CASE("process validation") {
  WebHarness web;
  auto cli = web.session();
  const std::string up = upload(cli, fixture_png(2, 1, 2, 64, 64));
  auto post = [&](const json& j) { return cli.Post("/process", j.dump(), "application/json"); };
  CHECK(post({{"upload_id", up}, {"resolution", "15x"}})->status == 400);
  CHECK(post({{"upload_id", up}, {"seg_threshold", -1}})->status == 400);
  CHECK(post(json::object())->status == 400);
  CHECK(post({{"upload_id", "nope"}})->status == 404);
  CHECK(post({{"upload_id", "../x"}})->status == 404);
  const auto forty = post({{"upload_id", up}, {"resolution", "40x"}});
  REQUIRE(forty->status == 200);
  const std::string id = json::parse(forty->body)["result_id"];
  const auto raw = cli.Get("/results/" + id + "/images/seg_raw.png");
  REQUIRE(raw->status == 200);
  CHECK(decode_image(pqtest::as_bytes(raw->body), true).width() == 32);
}

TEST_CASE("results page rounds for display and keeps the exact value") {
  WebHarness web;
  auto cli = web.session();
  const std::string up = upload(cli, fixture_png(3, 1, 5));
  const std::string id = process(cli, up)["result_id"];
  const auto page = json::parse(cli.Get("/results/" + id)->body);
  CHECK(page["scoring"]["percent_pos"].get<double>() == doctest::Approx(100.0 / 3.0));
  CHECK(page["display"]["percent_pos"] == 33.3);
  CHECK(page["display"]["num_total"] == 3);
  CHECK(cli.Get("/results/unknown")->status == 404);
  CHECK(cli.Get("/results/" + id + "/images/nothing.png")->status == 404);
  CHECK(cli.Get("/download/unknown.zip")->status == 404);
}

TEST_CASE("download zip: ten members, byte-identical across downloads") {
  WebHarness web;
  auto cli = web.session();
  const std::string up = upload(cli, fixture_png(7, 3, 21));
  const std::string id = process(cli, up)["result_id"];
  const auto z1 = download(cli, id);
  const auto z2 = download(cli, id);
  CHECK(z1 == z2);
  const auto zip = pqtest::read_zip(z1);
  std::vector<std::string> names;
  for (const auto& m : zip) names.push_back(m.name);
  CHECK(names == std::vector<std::string>{"dapi.png", "hema.png", "lap2.png", "marker.png",
                                          "original.png", "overlay.png", "scoring.csv", "scoring.json",
                                          "seg.png", "seg_raw.png"});
  const auto sj = json::parse(pqtest::as_string(member(zip, "scoring.json").data));
  CHECK(sj == json{{"num_total", 7}, {"num_pos", 3}, {"percent_pos", 300.0 / 7.0}});
  const std::string csv = pqtest::as_string(member(zip, "scoring.csv").data);
  CHECK(csv.starts_with("num_total,num_pos,percent_pos\n7,3,42.857"));
  for (const auto& m : zip) {
    if (m.name.ends_with(".png")) {
      const auto served = cli.Get("/results/" + id + "/images/" + m.name);
      REQUIRE_MESSAGE(served->status == 200, m.name);
      CHECK(pqtest::as_bytes(served->body) == m.data);
    }
  }
  CHECK(decode_image(member(zip, "overlay.png").data, true).width() == 192);
}

TEST_CASE("adjust persists and is reflected in the download") {
  WebHarness web;
  auto cli = web.session();
  const std::string up = upload(cli, fixture_png(12, 5, 31));
  const std::string id = process(cli, up)["result_id"];
  const auto before = pqtest::read_zip(download(cli, id));

  const auto r = cli.Post("/adjust/" + id, json{{"size_gate_min", 1e9}}.dump(), "application/json");
  REQUIRE(r->status == 200);
  const auto body = json::parse(r->body);
  CHECK(body["scoring"] == json{{"num_total", 0}, {"num_pos", 0}, {"percent_pos", 0.0}});
  CHECK(body["params"]["size_gate_min"] == 1e9);
  CHECK(body["thumbnails"].contains("seg"));
  CHECK(body["thumbnails"].contains("overlay"));

  const auto page = json::parse(cli.Get("/results/" + id)->body);
  CHECK(page["scoring"]["num_total"] == 0);
  const auto after = pqtest::read_zip(download(cli, id));
  CHECK(json::parse(pqtest::as_string(member(after, "scoring.json").data))["num_total"] == 0);
  CHECK(member(after, "seg_raw.png").data == member(before, "seg_raw.png").data);
  CHECK(member(after, "hema.png").data == member(before, "hema.png").data);
  CHECK(member(after, "seg.png").data != member(before, "seg.png").data);

  // Back to defaults restores the original rendering exactly.
  const auto back = cli.Post("/adjust/" + id, "{}", "application/json");
  REQUIRE(back->status == 200);
  const auto restored = pqtest::read_zip(download(cli, id));
  CHECK(member(restored, "seg.png").data == member(before, "seg.png").data);
  CHECK(member(restored, "overlay.png").data == member(before, "overlay.png").data);
  CHECK(member(restored, "scoring.json").data == member(before, "scoring.json").data);

  CHECK(cli.Post("/adjust/" + id, json{{"seg_threshold", 7}}.dump(), "application/json")->status == 400);
  CHECK(cli.Post("/adjust/unknown", "{}", "application/json")->status == 404);
}

TEST_CASE("feedback") {
  WebHarness web;
  auto cli = web.session();
  const std::string id = process(cli, upload(cli, fixture_png(2, 1, 3, 64, 64)))["result_id"];
  CHECK(cli.Post("/feedback/" + id, json{{"text", "looks right"}}.dump(), "application/json")->status == 204);
  CHECK(cli.Post("/feedback/" + id, "plain words", "text/plain")->status == 204);
  CHECK(cli.Post("/feedback/" + id, json{{"text", ""}}.dump(), "application/json")->status == 400);
  CHECK(cli.Post("/feedback/" + id, std::string(10000, 'x'), "text/plain")->status == 204);
  const auto over = cli.Post("/feedback/" + id, std::string(10001, 'x'), "text/plain");
  REQUIRE(over->status == 400);
  CHECK(json::parse(over->body)["error"] == "bad_parameter");
  // Characters, not bytes: 10000 two-byte characters are accepted.
  std::string wide;
  for (int i = 0; i < 10000; ++i) wide += "\xc3\xa9";
  CHECK(cli.Post("/feedback/" + id, json{{"text", wide}}.dump(), "application/json")->status == 204);
  CHECK(cli.Post("/feedback/unknown", "hi", "text/plain")->status == 404);
  const auto keys = web.store->list("feedback/" + id + "/");
  REQUIRE(keys.size() == 4);
  std::multiset<std::size_t> lengths;
  for (const auto& k : keys) lengths.insert(json::parse(web.store->get_text(k))["text"].get<std::string>().size());
  CHECK(lengths == std::multiset<std::size_t>{11, 11, 10000, 20000});
}

TEST_CASE("retention sweep removes expired uploads and results only") {
  WebHarness web(nullptr, 100);
  auto cli = web.session();
  const std::string old_up = upload(cli, fixture_png(2, 1, 1, 64, 64));
  const std::string old_res = process(cli, old_up)["result_id"];
  web.clock += 60;
  const std::string new_up = upload(cli, fixture_png(2, 1, 2, 64, 64));
  CHECK(web.service->sweep_expired() == 0);
  web.clock += 50;  // old records are 110 s old, new one 50 s
  CHECK(web.service->sweep_expired() == 2);
  CHECK(web.store->list("uploads/" + old_up).empty());
  CHECK(web.store->list("results/" + old_res).empty());
  CHECK(cli.Get("/results/" + old_res)->status == 404);
  CHECK(cli.Get("/download/" + old_res + ".zip")->status == 404);
  CHECK_FALSE(web.store->list("uploads/" + new_up).empty());
  CHECK(process(cli, new_up)["scoring"]["num_total"] == 2);
}

TEST_CASE("website backed by a remote API scores identically") {
  {
    pqtest::ApiHarness api;
    auto remote = std::make_shared<HttpProcessor>(ApiClient(api.url()));
    WebHarness local;
    WebHarness web(remote);
    const auto png = fixture_png(10, 6, 41);
    auto lc = local.session();
    auto rc = web.session();
    const auto a = process(lc, upload(lc, png));
    const auto b = process(rc, upload(rc, png));
    CHECK(a["scoring"] == b["scoring"]);
    const auto za = pqtest::read_zip(download(lc, a["result_id"]));
    const auto zb = pqtest::read_zip(download(rc, b["result_id"]));
    for (const auto& m : za) CHECK(m.data == member(zb, m.name).data);
    const std::string id = b["result_id"];
    const auto adj = rc.Post("/adjust/" + id, json{{"seg_threshold", 0.8}}.dump(), "application/json");
    REQUIRE(adj->status == 200);
    const auto ladj = lc.Post("/adjust/" + a["result_id"].get<std::string>(),
                              json{{"seg_threshold", 0.8}}.dump(), "application/json");
    CHECK(json::parse(adj->body)["scoring"] == json::parse(ladj->body)["scoring"]);
  }
}

TEST_CASE("constructor validation") {
  pqtest::TempDir dir;
  auto store = std::make_shared<LocalObjectStore>(dir / "s");
  auto pool = std::make_shared<JobPool>(1, 1);
  auto proc = std::make_shared<InProcessProcessor>(
      std::make_shared<Pipeline>(std::make_shared<ReferenceBackend>()), pool);
  WebAppOptions bad;
  bad.ttl_seconds = 0;
  CHECK_THROWS_AS(WebAppService(store, proc, bad), Error);
  CHECK_THROWS_AS(WebAppService(nullptr, proc, {}), Error);
  pool->shutdown();
}

}  // TEST_SUITE
