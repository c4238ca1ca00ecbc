import { mount } from "./controller.js";

const root = document.getElementById("app");
if (root) {
  const base = (window as unknown as { RTDTR_API?: string }).RTDTR_API ?? "http://127.0.0.1:8000";
  mount(root, base);
}
