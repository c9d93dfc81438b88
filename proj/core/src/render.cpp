#include "mmsurrogate/render.hpp"

#include <cstdio>
#include <sstream>

#include "mmsurrogate/eval.hpp"

namespace mmsurrogate {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

OverlayDocument render_image_overlay(const Instance& instance, const Explanation& explanation,
                                     const ExpertAnnotation* annotation,
                                     std::optional<std::string> background) {
  validate_explanation(explanation, &instance);
  if (annotation != nullptr) annotation->validate_against(instance);

  OverlayDocument doc;
  doc.background = std::move(background);
  doc.width = instance.image_width();
  doc.height = instance.image_height();
  std::size_t rank = 0;
  for (const auto& b : explanation.box_items) {
    doc.rects.push_back({b.box, kModelBoxColor,
                         "model rank " + std::to_string(++rank) + " box " + std::to_string(b.index)});
  }
  std::vector<Box> model_boxes;
  for (const auto& b : explanation.box_items) model_boxes.push_back(b.box);
  if (annotation != nullptr) {
    std::size_t i = 0;
    for (const auto& b : annotation->boxes) {
      doc.rects.push_back({b, kExpertBoxColor,
                           "expert " + annotation->annotator_id + " box " + std::to_string(i++)});
    }
    doc.caption.push_back("Similarity: " + fixed3(image_similarity(model_boxes, annotation->boxes)));
  }
  doc.caption.push_back("Target: " + explanation.finding);
  if (explanation.original_probability) {
    doc.caption.push_back("Prediction: " + fixed3(*explanation.original_probability));
  }
  return doc;
}

std::string to_svg(const OverlayDocument& doc) {
  constexpr double line = 18.0;
  const double caption_height = line * static_cast<double>(doc.caption.size()) + 8.0;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\""
      << " width=\"" << num(doc.width) << "\" height=\"" << num(doc.height + caption_height)
      << "\" viewBox=\"0 0 " << num(doc.width) << " " << num(doc.height + caption_height)
      << "\">\n";
  if (doc.background) {
    out << "  <image x=\"0\" y=\"0\" width=\"" << num(doc.width) << "\" height=\""
        << num(doc.height) << "\" href=\"" << escape(*doc.background) << "\" xlink:href=\""
        << escape(*doc.background) << "\" preserveAspectRatio=\"none\"/>\n";
  } else {
    out << "  <rect x=\"0\" y=\"0\" width=\"" << num(doc.width) << "\" height=\""
        << num(doc.height) << "\" fill=\"black\"/>\n";
  }
  for (const auto& r : doc.rects) {
    out << "  <rect x=\"" << num(r.box.x1) << "\" y=\"" << num(r.box.y1) << "\" width=\""
        << num(r.box.width()) << "\" height=\"" << num(r.box.height())
        << "\" fill=\"none\" stroke=\"" << r.color << "\" stroke-width=\"2\"><title>"
        << escape(r.label) << "</title></rect>\n";
  }
  double y = doc.height + line;
  for (const auto& c : doc.caption) {
    out << "  <text x=\"4\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape(c) << "</text>\n";
    y += line;
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_text_listing(const Instance& instance, const Explanation& explanation,
                                const ExpertAnnotation* annotation) {
  validate_explanation(explanation, &instance);
  std::set<std::string> model_words;
  for (const auto& w : explanation.word_items) model_words.insert(w.word);

  auto list = [](const std::vector<std::string>& words, const std::set<std::string>* other) {
    if (words.empty()) return std::string("<span class=\"none\">(none)</span>");
    std::string s = "[";
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i > 0) s += ", ";
      const bool shared = other != nullptr && other->contains(words[i]);
      s += shared ? "<mark class=\"shared\">" + escape(words[i]) + "</mark>" : escape(words[i]);
    }
    return s + "]";
  };

  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>"
      << escape(explanation.instance_id) << " - " << escape(explanation.finding)
      << "</title>\n<style>mark.shared{background:#ffe08a;font-weight:bold}"
      << " .label{font-weight:bold}</style>\n</head>\n<body>\n";
  if (annotation != nullptr) {
    out << "<p class=\"similarity\">Similarity: "
        << fixed3(text_similarity(annotation->words, model_words)) << "</p>\n";
  }
  out << "<p class=\"target\">Target: " << escape(explanation.finding) << "</p>\n";
  if (explanation.original_probability) {
    out << "<p class=\"prediction\">Prediction: " << fixed3(*explanation.original_probability)
        << "</p>\n";
  }
  if (annotation != nullptr) {
    const std::vector<std::string> expert(annotation->words.begin(), annotation->words.end());
    out << "<p class=\"expert\"><span class=\"label\">Domain Expert:</span> "
        << list(expert, &model_words) << "</p>\n";
  }
  std::vector<std::string> model;
  for (const auto& w : explanation.word_items) model.push_back(w.word);
  out << "<p class=\"model\"><span class=\"label\">Explainable Model:</span> "
      << list(model, annotation != nullptr ? &annotation->words : nullptr) << "</p>\n";
  out << "</body>\n</html>\n";
  return out.str();
}

}  // namespace mmsurrogate
