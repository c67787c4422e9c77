import { App } from "./app.js";

const app = new App(document, "");
app.mount();
app.init().catch((err) => {
  const panel = document.getElementById("message");
  if (panel) panel.textContent = String(err);
});

// handy for poking around in the devtools console
(window as unknown as { balloonseg: App }).balloonseg = app;
