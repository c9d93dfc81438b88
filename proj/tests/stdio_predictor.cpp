// Serves a synthetic model over the line protocol on stdin/stdout.
//   stdio_predictor <model.json> [--drop-first | --silent | --garbage]

#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "mmsurrogate/io.hpp"
#include "mmsurrogate/remote.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: stdio_predictor <model.json> [--drop-first|--silent|--garbage]\n";
    return 2;
  }
  const std::string mode = argc > 2 ? argv[2] : "";
  mmsurrogate::SyntheticPredictor predictor(mmsurrogate::load_model(argv[1]));
  mmsurrogate::ProtocolServer server(predictor);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "--silent") continue;
    if (mode == "--garbage") {
      std::cout << "not json\n" << std::flush;
      continue;
    }
    std::string reply = server.handle_line(line);
    if (mode == "--drop-first") {
      auto j = nlohmann::json::parse(reply);
      if (j.value("type", "") == "predictions" && !j["results"].empty()) {
        j["results"].erase(j["results"].begin());
        reply = j.dump();
      }
    }
    std::cout << reply << "\n" << std::flush;
  }
  return 0;
}
