import { ApiClient } from "./api";
import { App } from "./app";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

// same-origin by default; override for a dev server on another port
const base = new URLSearchParams(location.search).get("api") ?? "";
export const app = new App(root, new ApiClient(base));

declare global {
  interface Window {
    citylayoutApp: App;
  }
}
window.citylayoutApp = app;
