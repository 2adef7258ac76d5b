import { App } from "./session.js";

function boot(): void {
  new App(document).mount();
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
